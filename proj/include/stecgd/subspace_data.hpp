#pragma once

// Synthetic classification data on low-dimensional subspaces.
//
// Each class lives on a plane spanned by two orthonormal vectors. Samples are
// laid out on a polar grid r (cos phi b1 + sin phi b2) over a radius set and an
// angle set, optionally perturbed by clipped isotropic Gaussian noise.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>

#include "stecgd/dataset.hpp"
#include "stecgd/errors.hpp"
#include "stecgd/text_io.hpp"

namespace stecgd {

struct Grids {
  std::vector<double> radii;
  std::vector<double> angles;
};

/// Radii {1.0, 1.1, ..., 2.0} and angles {pi/40, 2 pi/40, ..., 2 pi}.
inline Grids default_grids() {
  Grids g;
  for (int j = 10; j <= 20; ++j) g.radii.push_back(j / 10.0);
  for (int j = 1; j <= 80; ++j) g.angles.push_back(j * std::numbers::pi / 40.0);
  return g;
}

namespace detail {

inline Matrix angled_pair_basis(int cls, double theta) {
  Matrix b = Matrix::Zero(4, 2);
  if (cls == 0) {
    // cos(pi/2) is 6e-17 in floating point; the orthogonal case must be exact.
    const double c = theta == std::numbers::pi / 2 ? 0.0 : std::cos(theta);
    b(0, 0) = 1.0;
    b(1, 1) = std::sin(theta);
    b(2, 1) = c;
  } else {
    b(2, 0) = 1.0;
    b(3, 1) = 1.0;
  }
  return b;
}

inline std::vector<Matrix> orthogonal_bases(int classes) {
  std::vector<Matrix> out;
  for (int i = 0; i < classes; ++i) {
    Matrix b = Matrix::Zero(2 * classes, 2);
    b(2 * i, 0) = 1.0;
    b(2 * i + 1, 1) = 1.0;
    out.push_back(std::move(b));
  }
  return out;
}

inline void rebuild_bases(SubspaceSpec& spec) {
  spec.bases.clear();
  switch (spec.layout) {
    case SubspaceLayout::AngledPair:
      spec.bases = {angled_pair_basis(0, spec.theta), angled_pair_basis(1, spec.theta)};
      break;
    case SubspaceLayout::Orthogonal:
      spec.bases = orthogonal_bases(spec.classes);
      break;
    case SubspaceLayout::Unknown:
      break;
  }
}

}  // namespace detail

/// Two planes in R^4 at principal angle theta. theta = pi/2 gives mutually
/// orthogonal class subspaces.
inline SubspaceSpec make_angled_pair(double theta, std::uint64_t seed = 0,
                                     double noise_sigma = 0.0) {
  if (!(theta > 0.0 && theta <= std::numbers::pi / 2)) {
    throw ConfigError("theta must lie in (0, pi/2]");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("noise sigma must be non-negative and finite");
  }
  SubspaceSpec spec;
  spec.layout = SubspaceLayout::AngledPair;
  spec.ambient_dim = 4;
  spec.classes = 2;
  spec.theta = theta;
  auto grids = default_grids();
  spec.radii = std::move(grids.radii);
  spec.angles = std::move(grids.angles);
  spec.noise_sigma = noise_sigma;
  spec.seed = seed;
  detail::rebuild_bases(spec);
  return spec;
}

/// n classes on the coordinate planes {e_{2i}, e_{2i+1}} of R^{2n}.
inline SubspaceSpec make_orthogonal(int classes, std::uint64_t seed = 0,
                                    double noise_sigma = 0.0) {
  if (classes < 1) throw ConfigError("need at least one class");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("noise sigma must be non-negative and finite");
  }
  SubspaceSpec spec;
  spec.layout = SubspaceLayout::Orthogonal;
  spec.ambient_dim = 2 * classes;
  spec.classes = classes;
  spec.theta = std::numbers::pi / 2;
  auto grids = default_grids();
  spec.radii = std::move(grids.radii);
  spec.angles = std::move(grids.angles);
  spec.noise_sigma = noise_sigma;
  spec.seed = seed;
  detail::rebuild_bases(spec);
  return spec;
}

/// Smallest principal angle between the spans of two column-orthonormal bases.
inline double principal_angle(const Matrix& a, const Matrix& b) {
  Eigen::JacobiSVD<Matrix> svd(a.transpose() * b);
  const double s = std::clamp(svd.singularValues()(0), 0.0, 1.0);
  return std::acos(s);
}

/// Deterministic under spec.seed. Samples are ordered by class, then radius,
/// then angle.
inline Dataset generate(const SubspaceSpec& spec) {
  if (!spec.has_bases() || static_cast<int>(spec.bases.size()) != spec.classes) {
    throw ConfigError("grid generation needs one basis per class");
  }
  for (const auto& b : spec.bases) {
    if (b.cols() != 2 || b.rows() != spec.ambient_dim) {
      throw ConfigError("grid generation supports planar (two-vector) class bases only");
    }
  }
  if (spec.radii.empty() || spec.angles.empty()) {
    throw ConfigError("radius and angle grids must be non-empty");
  }

  Dataset data;
  data.spec = spec;
  data.samples.reserve(static_cast<std::size_t>(spec.classes) * spec.radii.size() *
                       spec.angles.size());
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);
  const double clip = 3.0 * spec.noise_sigma;

  for (int cls = 0; cls < spec.classes; ++cls) {
    const Matrix& b = spec.bases[static_cast<std::size_t>(cls)];
    for (double r : spec.radii) {
      for (double phi : spec.angles) {
        Vector x = r * (std::cos(phi) * b.col(0) + std::sin(phi) * b.col(1));
        if (spec.noise_sigma > 0.0) {
          for (Eigen::Index c = 0; c < x.size(); ++c) {
            x[c] += std::clamp(normal(rng), -clip, clip);
          }
        }
        data.samples.push_back({std::move(x), cls});
      }
    }
  }
  return data;
}

// ---------------------------------------------------------------------------
// Text format
//
//   stecgd-dataset v1 d=<d> n=<n> count=<N> layout=<angled|orthogonal|unknown>
//       theta=<t> noise=<s> seed=<u64> radii=<a;b;..> angles=<a;b;..> digest=<hex>
//   x_1,...,x_d,label        (one line per sample, 17 significant digits)
//
// The digest is FNV-1a over the sample lines, newline included.

namespace detail {

inline std::string_view layout_name(SubspaceLayout l) {
  switch (l) {
    case SubspaceLayout::AngledPair:
      return "angled";
    case SubspaceLayout::Orthogonal:
      return "orthogonal";
    case SubspaceLayout::Unknown:
      return "unknown";
  }
  return "unknown";
}

inline std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += text::format_double(v[i]);
  }
  return out;
}

inline std::string sample_line(const Sample& s) {
  std::string line;
  for (Eigen::Index c = 0; c < s.x.size(); ++c) {
    line += text::format_double(s.x[c]);
    line += ',';
  }
  line += std::to_string(s.y);
  line += '\n';
  return line;
}

}  // namespace detail

inline void write_dataset(std::ostream& out, const Dataset& data) {
  std::string body;
  for (const auto& s : data.samples) body += detail::sample_line(s);
  text::Fnv1a digest;
  digest.update(body);

  const auto& spec = data.spec;
  out << "stecgd-dataset v1"
      << " d=" << spec.ambient_dim << " n=" << spec.classes << " count=" << data.size()
      << " layout=" << detail::layout_name(spec.layout)
      << " theta=" << text::format_double(spec.theta)
      << " noise=" << text::format_double(spec.noise_sigma) << " seed=" << spec.seed
      << " radii=" << detail::join_doubles(spec.radii)
      << " angles=" << detail::join_doubles(spec.angles) << " digest=" << digest.hex()
      << '\n'
      << body;
}

inline Dataset read_dataset(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw ParseError("missing dataset header", 1);
  const auto fields = text::split(header, ' ');
  if (fields.size() < 2 || fields[0] != "stecgd-dataset" || fields[1] != "v1") {
    throw ParseError("not a stecgd-dataset v1 file", 1);
  }
  std::map<std::string, std::string, std::less<>> kv;
  for (std::size_t f = 2; f < fields.size(); ++f) {
    if (fields[f].empty()) continue;
    const auto eq = fields[f].find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("malformed header field '" + std::string(fields[f]) + "'", 1);
    }
    kv.emplace(std::string(fields[f].substr(0, eq)), std::string(fields[f].substr(eq + 1)));
  }
  auto need = [&](std::string_view key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError("header is missing '" + std::string(key) + "'", 1);
    return it->second;
  };
  auto doubles = [&](std::string_view key) {
    std::vector<double> out;
    const auto it = kv.find(key);
    if (it == kv.end() || it->second.empty()) return out;
    for (auto part : text::split(it->second, ';')) out.push_back(text::parse_double(part, 1));
    return out;
  };

  Dataset data;
  auto& spec = data.spec;
  spec.ambient_dim = text::parse_int<int>(need("d"), 1);
  spec.classes = text::parse_int<int>(need("n"), 1);
  const auto count = text::parse_int<std::size_t>(need("count"), 1);
  if (spec.ambient_dim < 1 || spec.classes < 1) {
    throw ParseError("dimension and class count must be positive", 1);
  }
  const auto& layout = need("layout");
  if (layout == "angled") {
    spec.layout = SubspaceLayout::AngledPair;
  } else if (layout == "orthogonal") {
    spec.layout = SubspaceLayout::Orthogonal;
  } else if (layout == "unknown") {
    spec.layout = SubspaceLayout::Unknown;
  } else {
    throw ParseError("unknown layout '" + layout + "'", 1);
  }
  spec.theta = kv.count("theta") ? text::parse_double(kv.at("theta"), 1) : std::numbers::pi / 2;
  spec.noise_sigma = kv.count("noise") ? text::parse_double(kv.at("noise"), 1) : 0.0;
  spec.seed = kv.count("seed") ? text::parse_int<std::uint64_t>(kv.at("seed"), 1) : 0;
  spec.radii = doubles("radii");
  spec.angles = doubles("angles");
  const std::string expected_digest = kv.count("digest") ? kv.at("digest") : "";
  if (spec.layout == SubspaceLayout::AngledPair && (spec.ambient_dim != 4 || spec.classes != 2)) {
    throw ParseError("angled layout requires d=4 and n=2", 1);
  }
  if (spec.layout == SubspaceLayout::Orthogonal && spec.ambient_dim != 2 * spec.classes) {
    throw ParseError("orthogonal layout requires d=2n", 1);
  }
  detail::rebuild_bases(spec);

  text::Fnv1a digest;
  std::string line;
  std::size_t lineno = 1;
  data.samples.reserve(count);
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (data.samples.size() == count) {
      throw ParseError("more samples than the header's count=" + std::to_string(count), lineno);
    }
    const auto cells = text::split(line, ',');
    if (cells.size() != static_cast<std::size_t>(spec.ambient_dim) + 1) {
      throw ParseError("expected " + std::to_string(spec.ambient_dim + 1) + " fields, got " +
                           std::to_string(cells.size()),
                       lineno);
    }
    Sample s;
    s.x.resize(spec.ambient_dim);
    for (int c = 0; c < spec.ambient_dim; ++c) s.x[c] = text::parse_double(cells[c], lineno);
    s.y = text::parse_int<int>(cells.back(), lineno);
    if (s.y < 0 || s.y >= spec.classes) {
      throw ParseError("label " + std::to_string(s.y) + " out of range", lineno);
    }
    digest.update(line);
    digest.update("\n");
    data.samples.push_back(std::move(s));
  }
  if (data.samples.size() != count) {
    throw ParseError("truncated: header declares " + std::to_string(count) +
                         " samples, found " + std::to_string(data.samples.size()),
                     lineno + 1);
  }
  if (!expected_digest.empty() && expected_digest != digest.hex()) {
    throw ParseError("digest mismatch (file corrupted or edited)", lineno + 1);
  }
  return data;
}

inline void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_dataset(out, data);
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_dataset(in);
}

}  // namespace stecgd
