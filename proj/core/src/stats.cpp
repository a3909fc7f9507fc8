#include "psir/stats.hpp"

#include "psir/parallel.hpp"
#include "psir/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace psir::stats {
namespace {

// Midranks of |d| over all entries (zeros included), then the doubled ranks
// of the nonzero entries and the observed doubled W+.
struct RankedDiffs {
  std::vector<Index> rank2;   // 2 * midrank per nonzero entry
  std::vector<bool> positive; // sign per nonzero entry
  Index w2_obs = 0;           // 2 * observed W+
};

RankedDiffs rank_differences(const std::vector<double>& d) {
  const Index n = static_cast<Index>(d.size());
  if (n < 1) throw ValueError("wilcoxon: empty differences");
  if (!all_finite(d)) throw ValueError("wilcoxon: non-finite differences");

  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return std::abs(d[a]) < std::abs(d[b]);
  });

  // Midranks over tie groups of |d|; doubled midranks are exact integers.
  std::vector<Index> rank2_all(n);
  Index i = 0;
  while (i < n) {
    Index j = i;
    while (j < n && std::abs(d[order[j]]) == std::abs(d[order[i]])) ++j;
    const Index r2 = (i + 1) + j; // 2 * (i+1 + j) / 2
    for (Index t = i; t < j; ++t) rank2_all[order[t]] = r2;
    i = j;
  }

  RankedDiffs out;
  for (Index t = 0; t < n; ++t) {
    if (d[t] == 0.0) continue; // Pratt: rank consumed, term dropped
    out.rank2.push_back(rank2_all[t]);
    out.positive.push_back(d[t] > 0.0);
    if (d[t] > 0.0) out.w2_obs += rank2_all[t];
  }
  if (out.rank2.empty())
    throw AllZeroError("wilcoxon: all differences are zero (Pratt statistic undefined)");
  if (static_cast<Index>(out.rank2.size()) > kExactLimit)
    throw ExactLimitError("wilcoxon: more than " + std::to_string(kExactLimit) +
                          " nonzero differences; exact enumeration refused");
  return out;
}

// Exact null counts of W+ (doubled scale) via the shift algorithm: each
// nonzero rank enters the statistic with probability 1/2.
std::vector<double> null_counts(const std::vector<Index>& rank2) {
  Index total = 0;
  for (Index r : rank2) total += r;
  std::vector<double> counts(total + 1, 0.0);
  counts[0] = 1.0;
  Index reach = 0;
  for (Index r : rank2) {
    reach += r;
    for (Index s = reach; s >= r; --s) counts[s] += counts[s - r];
  }
  return counts;
}

} // namespace

double wilcoxon_exact(const std::vector<double>& d, Alternative alternative) {
  const RankedDiffs ranked = rank_differences(d);
  const auto counts = null_counts(ranked.rank2);
  const double total = std::ldexp(1.0, static_cast<int>(ranked.rank2.size()));

  double ge = 0, le = 0;
  for (Index s = 0; s < static_cast<Index>(counts.size()); ++s) {
    if (s >= ranked.w2_obs) ge += counts[s];
    if (s <= ranked.w2_obs) le += counts[s];
  }
  switch (alternative) {
    case Alternative::Greater: return ge / total;
    case Alternative::Less: return le / total;
    case Alternative::TwoSided:
      return std::min(1.0, 2.0 * std::min(ge, le) / total);
  }
  throw ValueError("wilcoxon: unknown alternative");
}

TostResult tost_equivalence(const std::vector<double>& d, double margin) {
  if (!(margin > 0)) throw ValueError("tost: margin must be positive");
  std::vector<double> shifted(d.size());
  TostResult r;
  for (std::size_t i = 0; i < d.size(); ++i) shifted[i] = d[i] + margin;
  r.p_lower = wilcoxon_exact(shifted, Alternative::Greater);
  for (std::size_t i = 0; i < d.size(); ++i) shifted[i] = d[i] - margin;
  r.p_upper = wilcoxon_exact(shifted, Alternative::Less);
  r.p_tost = std::max(r.p_lower, r.p_upper);
  return r;
}

const char* to_string(Decision d) {
  switch (d) {
    case Decision::Superior: return "superior";
    case Decision::Equivalent: return "equivalent";
    case Decision::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

double TestVerdict::governing_p() const {
  if (decision == Decision::Superior) return superiority_p.value_or(1.0);
  if (tost_p_lower || tost_p_upper) return p_tost();
  return 1.0;
}

TestVerdict fixed_sequence(const std::vector<double>& d, double margin,
                           double alpha, const std::string& variant) {
  if (!(alpha > 0 && alpha < 1)) throw ValueError("fixed_sequence: bad alpha");
  TestVerdict v;
  v.variant = variant;
  v.n_pairs = static_cast<Index>(d.size());

  bool superior = false;
  try {
    const double p = wilcoxon_exact(d, Alternative::Greater);
    v.superiority_p = p;
    superior = p <= alpha;
  } catch (const AllZeroError&) {
    // Undefined statistic leans null: not superior, superiority_p absent.
  }

  if (superior) {
    v.decision = Decision::Superior;
    return v;
  }

  try {
    const TostResult t = tost_equivalence(d, margin);
    v.tost_p_lower = t.p_lower;
    v.tost_p_upper = t.p_upper;
    v.decision = t.p_tost <= alpha ? Decision::Equivalent : Decision::Inconclusive;
  } catch (const AllZeroError&) {
    v.decision = Decision::Inconclusive;
  }
  return v;
}

std::vector<bool> holm_adjust(const std::vector<double>& p, double alpha) {
  const Index m = static_cast<Index>(p.size());
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) throw ValueError("holm: p-values must be in [0,1]");
  std::vector<Index> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return p[a] < p[b]; });
  std::vector<bool> reject(m, false);
  for (Index i = 0; i < m; ++i) {
    if (p[order[i]] <= alpha / static_cast<double>(m - i))
      reject[order[i]] = true;
    else
      break; // step-down stops at the first failure
  }
  return reject;
}

std::pair<double, double> bootstrap_ci(const std::vector<double>& values,
                                       Index iterations, double level,
                                       std::uint64_t seed) {
  if (values.empty()) throw ValueError("bootstrap: empty input");
  if (iterations < 1) throw ValueError("bootstrap: need at least one iteration");
  if (!(level > 0 && level < 1)) throw ValueError("bootstrap: bad level");

  const std::size_t n = values.size();
  std::vector<double> means(iterations);
  parallel_for(static_cast<std::size_t>(iterations), [&](std::size_t b) {
    Rng rng(substream(seed, b));
    double acc = 0;
    for (std::size_t j = 0; j < n; ++j) acc += values[rng.index(n)];
    means[b] = acc / static_cast<double>(n);
  });
  std::sort(means.begin(), means.end());

  const double q_lo = (1.0 - level) / 2.0;
  auto nearest_rank = [&](double q) {
    Index rank = static_cast<Index>(std::ceil(q * static_cast<double>(iterations)));
    rank = std::clamp<Index>(rank, 1, iterations);
    return means[rank - 1];
  };
  return {nearest_rank(q_lo), nearest_rank(1.0 - q_lo)};
}

MergedVerdict conservative_merge(const TestVerdict& reader1,
                                 const TestVerdict& reader2) {
  if (reader1.variant != reader2.variant)
    throw ValueError("conservative_merge: variant mismatch ('" + reader1.variant +
                     "' vs '" + reader2.variant + "')");
  auto strength = [](Decision d) {
    switch (d) {
      case Decision::Superior: return 2;
      case Decision::Equivalent: return 1;
      case Decision::Inconclusive: return 0;
    }
    return 0;
  };
  MergedVerdict m;
  m.variant = reader1.variant;
  m.reader1 = reader1;
  m.reader2 = reader2;
  m.decision = strength(reader1.decision) <= strength(reader2.decision)
                   ? reader1.decision
                   : reader2.decision;
  return m;
}

PairedScoreTable parse_score_csv(const std::string& text) {
  PairedScoreTable rows;
  std::istringstream iss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(iss, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
      line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("patient_id", 0) == 0) continue; // header
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 5)
      throw ValueError("scores csv: line " + std::to_string(lineno) +
                       ": expected 5 fields, got " + std::to_string(fields.size()));
    ScoreRow row;
    row.patient_id = fields[0];
    row.variant = fields[1];
    row.reader = fields[2];
    try {
      std::size_t pos = 0;
      row.score_a = std::stod(fields[3], &pos);
      if (pos != fields[3].size()) throw std::invalid_argument(fields[3]);
      row.score_b = std::stod(fields[4], &pos);
      if (pos != fields[4].size()) throw std::invalid_argument(fields[4]);
    } catch (const std::exception&) {
      throw ValueError("scores csv: line " + std::to_string(lineno) +
                       ": scores must be numeric");
    }
    if (row.score_a < 1.0 || row.score_a > 5.0 || row.score_b < 1.0 ||
        row.score_b > 5.0)
      throw ValueError("scores csv: line " + std::to_string(lineno) +
                       ": scores must be in [1,5]");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValueError("scores csv: no data rows");
  return rows;
}

PairedScoreTable aggregate_by_patient(const PairedScoreTable& rows) {
  std::vector<std::tuple<std::string, std::string, std::string>> order;
  std::map<std::tuple<std::string, std::string, std::string>,
           std::pair<std::pair<double, double>, Index>>
      acc;
  for (const auto& r : rows) {
    const auto key = std::make_tuple(r.patient_id, r.variant, r.reader);
    auto [it, inserted] = acc.try_emplace(key, std::make_pair(std::make_pair(0.0, 0.0), 0));
    if (inserted) order.push_back(key);
    it->second.first.first += r.score_a;
    it->second.first.second += r.score_b;
    it->second.second += 1;
  }
  PairedScoreTable out;
  for (const auto& key : order) {
    const auto& [sums, count] = acc[key];
    out.push_back(ScoreRow{std::get<0>(key), std::get<1>(key), std::get<2>(key),
                           sums.first / count, sums.second / count});
  }
  return out;
}

ProtocolReport evaluate_protocol(const PairedScoreTable& table,
                                 const ProtocolConfig& cfg) {
  if (table.empty()) throw ValueError("protocol: empty score table");
  {
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    for (const auto& r : table)
      if (!seen.insert({r.patient_id, r.variant, r.reader}).second)
        throw ValueError("protocol: duplicate (patient, variant, reader) row for " +
                         r.patient_id + "/" + r.variant + "/" + r.reader +
                         "; aggregate per patient first");
  }

  std::vector<std::string> variants, readers;
  for (const auto& r : table) {
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end())
      variants.push_back(r.variant);
    if (std::find(readers.begin(), readers.end(), r.reader) == readers.end())
      readers.push_back(r.reader);
  }
  if (readers.size() != 2)
    throw ValueError("protocol: expected exactly 2 readers, got " +
                     std::to_string(readers.size()));

  ProtocolReport report;
  std::map<std::string, std::vector<TestVerdict>> by_reader;

  std::uint64_t ci_stream = 0;
  for (const auto& reader : readers) {
    std::vector<TestVerdict> verdicts;
    for (const auto& variant : variants) {
      std::vector<double> diffs, a_scores, b_scores;
      for (const auto& r : table)
        if (r.reader == reader && r.variant == variant) {
          diffs.push_back(r.score_a - r.score_b);
          a_scores.push_back(r.score_a);
          b_scores.push_back(r.score_b);
        }
      if (diffs.empty())
        throw ValueError("protocol: no rows for reader " + reader + " variant " +
                         variant);
      verdicts.push_back(fixed_sequence(diffs, cfg.margin, cfg.alpha, variant));

      VariantCi ci;
      ci.variant = variant;
      ci.reader = reader;
      ci.n = static_cast<Index>(a_scores.size());
      ci.mean_a = std::accumulate(a_scores.begin(), a_scores.end(), 0.0) / ci.n;
      ci.mean_b = std::accumulate(b_scores.begin(), b_scores.end(), 0.0) / ci.n;
      std::tie(ci.ci_a_lo, ci.ci_a_hi) = bootstrap_ci(
          a_scores, cfg.bootstrap_iters, cfg.ci_level, substream(cfg.seed, ci_stream++));
      std::tie(ci.ci_b_lo, ci.ci_b_hi) = bootstrap_ci(
          b_scores, cfg.bootstrap_iters, cfg.ci_level, substream(cfg.seed, ci_stream++));
      report.cis.push_back(ci);
    }

    // Family-wise control across variants within this reader; a conclusion
    // that loses its Holm rejection is downgraded to inconclusive.
    std::vector<double> governing;
    for (const auto& v : verdicts) governing.push_back(v.governing_p());
    const auto rejected = holm_adjust(governing, cfg.alpha);
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
      verdicts[i].holm_rejected = rejected[i];
      if (!rejected[i]) verdicts[i].decision = Decision::Inconclusive;
    }
    by_reader[reader] = std::move(verdicts);
  }

  for (std::size_t vi = 0; vi < variants.size(); ++vi)
    report.verdicts.push_back(
        conservative_merge(by_reader[readers[0]][vi], by_reader[readers[1]][vi]));
  return report;
}

namespace {

std::string opt_str(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(10);
  os << *v;
  return os.str();
}

} // namespace

std::string ProtocolReport::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "variant,reader,n,superiority_p,tost_p_lower,tost_p_upper,p_tost,"
        "holm_rejected,decision,merged_decision\n";
  for (const auto& m : verdicts) {
    for (const TestVerdict* v : {&m.reader1, &m.reader2}) {
      os << m.variant << "," << (v == &m.reader1 ? "1" : "2") << "," << v->n_pairs
         << "," << opt_str(v->superiority_p) << "," << opt_str(v->tost_p_lower)
         << "," << opt_str(v->tost_p_upper) << ","
         << (v->tost_p_lower || v->tost_p_upper ? opt_str(v->p_tost()) : "")
         << "," << (v->holm_rejected ? "1" : "0") << "," << to_string(v->decision)
         << "," << to_string(m.decision) << "\n";
    }
  }
  os << "# variant,reader,n,mean_a,ci_a_lo,ci_a_hi,mean_b,ci_b_lo,ci_b_hi\n";
  for (const auto& c : cis)
    os << "# ci," << c.variant << "," << c.reader << "," << c.n << "," << c.mean_a
       << "," << c.ci_a_lo << "," << c.ci_a_hi << "," << c.mean_b << ","
       << c.ci_b_lo << "," << c.ci_b_hi << "\n";
  return os.str();
}

std::string ProtocolReport::to_table() const {
  std::ostringstream os;
  os << "variant        reader  n     sup_p       tost_p      holm  decision\n";
  for (const auto& m : verdicts) {
    for (const TestVerdict* v : {&m.reader1, &m.reader2}) {
      char buf[160];
      const bool tost_ran = v->tost_p_lower || v->tost_p_upper;
      std::snprintf(buf, sizeof(buf), "%-14s %-7s %-5lld %-11s %-11s %-5s %s\n",
                    m.variant.c_str(), v == &m.reader1 ? "1" : "2",
                    static_cast<long long>(v->n_pairs),
                    v->superiority_p ? opt_str(v->superiority_p).substr(0, 10).c_str()
                                     : "n/a",
                    tost_ran ? opt_str(v->p_tost()).substr(0, 10).c_str() : "n/a",
                    v->holm_rejected ? "yes" : "no", to_string(v->decision));
      os << buf;
    }
    os << m.variant << "  -> conservative conclusion: " << to_string(m.decision)
       << "\n";
  }
  os << "\nmean scores with bootstrap CIs\n";
  for (const auto& c : cis) {
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "%-14s reader %-3s n=%-4lld A %.3f [%.3f, %.3f]  B %.3f [%.3f, %.3f]\n",
                  c.variant.c_str(), c.reader.c_str(),
                  static_cast<long long>(c.n), c.mean_a, c.ci_a_lo, c.ci_a_hi,
                  c.mean_b, c.ci_b_lo, c.ci_b_hi);
    os << buf;
  }
  return os.str();
}

} // namespace psir::stats
