#include "psir/series.hpp"

#include "psir/cxf.hpp"
#include "psir/keyvalue.hpp"

#include <cstdio>

namespace psir::series {
namespace {

std::string pair_name(Index i, const char* channel) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "pair%03lld_%s.cxf", static_cast<long long>(i),
                channel);
  return buf;
}

} // namespace

std::filesystem::path manifest_path(const std::filesystem::path& dir) {
  return dir / "manifest.txt";
}

void write_series(const std::filesystem::path& dir,
                  const phantom::AcquisitionSeries& series) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("series: cannot create directory: " + dir.string());

  KeyValueFile kv;
  kv.set_i64("series_version", 1);
  kv.set_i64("n_avg", series.n_avg);
  kv.set_i64("coils", series.sim_sens.coils);
  kv.set_i64("rows", series.truth_ir.rows);
  kv.set_i64("cols", series.truth_ir.cols);
  kv.set_i64("accel", series.mask.acceleration);
  kv.set_i64("acs_lines", series.mask.acs_lines);
  std::string bits(series.mask.sampled.size(), '0');
  for (std::size_t i = 0; i < series.mask.sampled.size(); ++i)
    if (series.mask.sampled[i]) bits[i] = '1';
  kv.set("mask_rows", bits);
  kv.set_f64_list("motion_dy", series.motion.dy);
  kv.set_f64_list("motion_dx", series.motion.dx);
  kv.save(manifest_path(dir));

  write_array(dir / "truth_ir.cxf", series.truth_ir);
  write_array(dir / "truth_pd.cxf", series.truth_pd);
  MultiCoilKSpace sens(series.sim_sens.coils, series.sim_sens.rows,
                       series.sim_sens.cols);
  sens.data = series.sim_sens.data;
  write_array(dir / "sens.cxf", sens);
  ComplexImage cov(series.noise_cov.coils, series.noise_cov.coils);
  cov.data = series.noise_cov.m;
  write_array(dir / "noise_cov.cxf", cov);
  for (Index i = 0; i < series.n_avg; ++i) {
    write_array(dir / pair_name(i, "ir"), series.k_ir[i]);
    write_array(dir / pair_name(i, "pd"), series.k_pd[i]);
  }
}

phantom::AcquisitionSeries read_series(const std::filesystem::path& dir) {
  const auto mpath = manifest_path(dir);
  if (!std::filesystem::exists(mpath))
    throw MissingManifestError("series: no manifest at " + mpath.string());
  const KeyValueFile kv = KeyValueFile::load(mpath);
  if (kv.require_i64("series_version") != 1)
    throw ValueError("series: unsupported manifest version");

  phantom::AcquisitionSeries s;
  s.n_avg = kv.require_i64("n_avg");
  const Index rows = kv.require_i64("rows");

  s.mask.rows = rows;
  s.mask.acceleration = static_cast<int>(kv.require_i64("accel"));
  s.mask.acs_lines = kv.require_i64("acs_lines");
  const std::string bits = kv.require("mask_rows");
  if (static_cast<Index>(bits.size()) != rows)
    throw ValueError("series: mask_rows length mismatch");
  s.mask.sampled.resize(rows);
  for (Index i = 0; i < rows; ++i) s.mask.sampled[i] = bits[i] == '1';
  s.mask.validate();

  s.motion.dy = kv.require_f64_list("motion_dy");
  s.motion.dx = kv.require_f64_list("motion_dx");
  s.motion.validate();

  s.truth_ir = read_complex(dir / "truth_ir.cxf");
  s.truth_pd = read_complex(dir / "truth_pd.cxf");
  const MultiCoilKSpace sens = read_multicoil(dir / "sens.cxf");
  s.sim_sens.coils = sens.coils;
  s.sim_sens.rows = sens.rows;
  s.sim_sens.cols = sens.cols;
  s.sim_sens.data = sens.data;
  const ComplexImage cov = read_complex(dir / "noise_cov.cxf");
  if (cov.rows != cov.cols) throw ValueError("series: noise covariance not square");
  s.noise_cov.coils = cov.rows;
  s.noise_cov.m = cov.data;
  for (Index i = 0; i < s.n_avg; ++i) {
    s.k_ir.push_back(read_multicoil(dir / pair_name(i, "ir")));
    s.k_pd.push_back(read_multicoil(dir / pair_name(i, "pd")));
  }
  return s;
}

} // namespace psir::series
