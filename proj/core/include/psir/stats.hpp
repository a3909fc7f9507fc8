#pragma once

#include "psir/types.hpp"

#include <filesystem>
#include <optional>

namespace psir::stats {

// Exact signed-rank machinery: absolute differences are ranked with midranks
// for ties, zeros keep their ranks but drop from the statistic (Pratt), and
// the null distribution of W+ is enumerated exactly over the realized rank
// values. No normal approximation is available; past the exact limit the
// operation errors out.

constexpr Index kExactLimit = 30; // nonzero differences

/// All differences are zero: under Pratt handling the statistic is undefined.
class AllZeroError : public Error {
public:
  using Error::Error;
};

class ExactLimitError : public Error {
public:
  using Error::Error;
};

enum class Alternative { Greater, Less, TwoSided };

double wilcoxon_exact(const std::vector<double>& d, Alternative alternative);

struct TostResult {
  double p_lower = 1.0; // H0: median <= -margin, tested on d + margin
  double p_upper = 1.0; // H0: median >= +margin, tested on d - margin
  double p_tost = 1.0;  // max of the two
};

TostResult tost_equivalence(const std::vector<double>& d, double margin);

enum class Decision { Superior, Equivalent, Inconclusive };

const char* to_string(Decision d);

struct TestVerdict {
  std::string variant;
  std::optional<double> superiority_p;  // absent if undefined (all-zero d)
  std::optional<double> tost_p_lower;   // present only when TOST ran
  std::optional<double> tost_p_upper;
  Decision decision = Decision::Inconclusive;
  bool holm_rejected = false; // set by the protocol driver
  Index n_pairs = 0;

  double p_tost() const {
    return std::max(tost_p_lower.value_or(1.0), tost_p_upper.value_or(1.0));
  }
  /// p backing the conclusion: superiority p if superior, else the TOST p.
  double governing_p() const;
};

/// Superiority first; only if not established, TOST at the same alpha.
TestVerdict fixed_sequence(const std::vector<double>& d, double margin,
                           double alpha, const std::string& variant = "");

/// Holm step-down rejection flags, mapped back to input order.
std::vector<bool> holm_adjust(const std::vector<double>& p, double alpha);

/// Percentile bootstrap CI of the mean, nearest-rank percentiles.
/// Resample b draws its indices from substream(seed, b), so the result is
/// independent of thread count and reproducible bit-for-bit.
std::pair<double, double> bootstrap_ci(const std::vector<double>& values,
                                       Index iterations, double level,
                                       std::uint64_t seed);

/// Both readers' verdicts for one variant plus the conservative conclusion.
struct MergedVerdict {
  std::string variant;
  TestVerdict reader1;
  TestVerdict reader2;
  Decision decision = Decision::Inconclusive;
};

/// Keeps the weaker conclusion (superior > equivalent > inconclusive) and
/// carries both readers' p-values.
MergedVerdict conservative_merge(const TestVerdict& reader1,
                                 const TestVerdict& reader2);

// ---- Reader-study protocol driver ----

struct ScoreRow {
  std::string patient_id;
  std::string variant;
  std::string reader;
  double score_a = 0; // method under test
  double score_b = 0; // reference method
};

using PairedScoreTable = std::vector<ScoreRow>;

/// Parses `patient_id,variant,reader,score_a,score_b` (header optional).
/// Throws ValueError naming the 1-based line of the first malformed row.
PairedScoreTable parse_score_csv(const std::string& text);

/// Per-stack rows -> one row per (patient, variant, reader) by mean score.
PairedScoreTable aggregate_by_patient(const PairedScoreTable& rows);

struct ProtocolConfig {
  double alpha = 0.05;
  double margin = 0.25;
  Index bootstrap_iters = 100000;
  double ci_level = 0.95;
  std::uint64_t seed = 1;
};

struct VariantCi {
  std::string variant;
  std::string reader;
  double mean_a = 0, ci_a_lo = 0, ci_a_hi = 0;
  double mean_b = 0, ci_b_lo = 0, ci_b_hi = 0;
  Index n = 0;
};

struct ProtocolReport {
  std::vector<MergedVerdict> verdicts; // one per variant
  std::vector<VariantCi> cis;          // one per (variant, reader)

  std::string to_csv() const;
  std::string to_table() const; // human-readable
};

/// Full protocol: per reader and variant, fixed-sequence test; Holm across
/// variants within each reader (a conclusion losing its Holm rejection is
/// downgraded to inconclusive); conservative merge across readers; bootstrap
/// CIs of the mean scores. Scores must already be patient-level.
ProtocolReport evaluate_protocol(const PairedScoreTable& table,
                                 const ProtocolConfig& cfg);

} // namespace psir::stats
