#pragma once

// Versioned text snapshots, magic "OPE1". Doubles are written as hexfloats
// so a resumed stream is bit-exact with an uninterrupted one.

#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "streamkern/additive.hpp"
#include "streamkern/errors.hpp"
#include "streamkern/projection.hpp"

namespace streamkern {

namespace detail {

inline void write_double(std::ostream& os, double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  os << buf;
}

inline void write_doubles(std::ostream& os, const char* tag, const std::vector<double>& vs) {
  os << tag;
  for (double v : vs) {
    os << ' ';
    write_double(os, v);
  }
  os << '\n';
}

inline double read_double(std::istream& is, const char* what) {
  std::string tok;
  if (!(is >> tok)) throw ConfigError(std::string("snapshot truncated reading ") + what);
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str()) throw ConfigError(std::string("bad snapshot value for ") + what);
  return v;
}

inline std::int64_t read_int(std::istream& is, const char* what) {
  std::int64_t v = 0;
  if (!(is >> v)) throw ConfigError(std::string("snapshot truncated reading ") + what);
  return v;
}

inline void expect_tag(std::istream& is, const std::string& tag) {
  std::string tok;
  if (!(is >> tok) || tok != tag)
    throw ConfigError("snapshot parse error, expected '" + tag + "' got '" + tok + "'");
}

inline std::vector<double> read_doubles(std::istream& is, const std::string& tag,
                                        std::size_t count) {
  expect_tag(is, tag);
  std::vector<double> vs(count);
  for (std::size_t i = 0; i < count; ++i) vs[i] = read_double(is, tag.c_str());
  return vs;
}

}  // namespace detail

inline void save_snapshot(const ProjectionSnapshot& snap, std::ostream& os) {
  os << "OPE1 projection\n";
  os << "kernel " << snap.kernel_id << '\n';
  os << "alpha ";
  detail::write_double(os, snap.alpha);
  os << "\nd " << snap.d << "\nc ";
  detail::write_double(os, snap.c);
  os << "\nn0 " << snap.n0 << "\nclamp ";
  detail::write_double(os, snap.clamp);
  os << "\njitter ";
  detail::write_double(os, snap.jitter_tol);
  os << "\nbuffer " << snap.warm_buffer << '\n';
  os << "n " << snap.n << "\nN " << snap.basis << "\ninitialized " << (snap.initialized ? 1 : 0)
     << "\nflops " << snap.flops << '\n';
  detail::write_doubles(os, "theta", snap.theta);
  detail::write_doubles(os, "s", snap.moment);
  detail::write_doubles(os, "phi", snap.phi_upper);
  detail::write_doubles(os, "xs", snap.xs);
  detail::write_doubles(os, "ys", snap.ys);
  os << "end\n";
}

inline void save_snapshot(const ProjectionState& state, std::ostream& os) {
  save_snapshot(state.snapshot(), os);
}

inline ProjectionSnapshot load_projection_snapshot(std::istream& is) {
  detail::expect_tag(is, "OPE1");
  detail::expect_tag(is, "projection");
  ProjectionSnapshot snap;
  detail::expect_tag(is, "kernel");
  if (!(is >> snap.kernel_id)) throw ConfigError("snapshot truncated reading kernel id");
  detail::expect_tag(is, "alpha");
  snap.alpha = detail::read_double(is, "alpha");
  detail::expect_tag(is, "d");
  snap.d = static_cast<int>(detail::read_int(is, "d"));
  detail::expect_tag(is, "c");
  snap.c = detail::read_double(is, "c");
  detail::expect_tag(is, "n0");
  snap.n0 = detail::read_int(is, "n0");
  detail::expect_tag(is, "clamp");
  snap.clamp = detail::read_double(is, "clamp");
  detail::expect_tag(is, "jitter");
  snap.jitter_tol = detail::read_double(is, "jitter");
  detail::expect_tag(is, "buffer");
  snap.warm_buffer = static_cast<int>(detail::read_int(is, "buffer"));
  detail::expect_tag(is, "n");
  snap.n = detail::read_int(is, "n");
  detail::expect_tag(is, "N");
  snap.basis = detail::read_int(is, "N");
  detail::expect_tag(is, "initialized");
  snap.initialized = detail::read_int(is, "initialized") != 0;
  detail::expect_tag(is, "flops");
  snap.flops = static_cast<std::uint64_t>(detail::read_int(is, "flops"));
  snap.theta = detail::read_doubles(is, "theta", snap.basis);
  snap.moment = detail::read_doubles(is, "s", snap.basis);
  snap.phi_upper =
      detail::read_doubles(is, "phi", static_cast<std::size_t>(snap.basis) * (snap.basis + 1) / 2);
  snap.xs = detail::read_doubles(is, "xs", static_cast<std::size_t>(snap.n) * snap.d);
  snap.ys = detail::read_doubles(is, "ys", static_cast<std::size_t>(snap.n));
  detail::expect_tag(is, "end");
  return snap;
}

inline ProjectionState load_projection_state(std::istream& is) {
  return ProjectionState::restore(load_projection_snapshot(is));
}

// Additive records carry a dimension header and embed the stacked projection
// record verbatim.
inline void save_snapshot(const AdditiveState& state, std::ostream& os) {
  const AdditiveState::Snapshot snap = state.snapshot();
  os << "OPE1 additive\n";
  os << "dim " << snap.d << '\n';
  os << "per_kernel " << snap.per_kernel_id << '\n';
  os << "levels_n0 " << snap.n0_levels << '\n';
  save_snapshot(snap.inner, os);
}

inline AdditiveState load_additive_state(std::istream& is) {
  detail::expect_tag(is, "OPE1");
  detail::expect_tag(is, "additive");
  AdditiveState::Snapshot snap;
  detail::expect_tag(is, "dim");
  snap.d = static_cast<int>(detail::read_int(is, "dim"));
  detail::expect_tag(is, "per_kernel");
  if (!(is >> snap.per_kernel_id)) throw ConfigError("snapshot truncated reading per_kernel");
  detail::expect_tag(is, "levels_n0");
  snap.n0_levels = detail::read_int(is, "levels_n0");
  snap.inner = load_projection_snapshot(is);
  return AdditiveState::restore(snap);
}

}  // namespace streamkern
