#pragma once

// Network checkpoints (one JSON document) and training traces (JSON lines).
// Floats are written with 17 significant digits so files round-trip exactly.

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "stecgd/coarse_grad.hpp"
#include "stecgd/errors.hpp"
#include "stecgd/network.hpp"
#include "stecgd/text_io.hpp"

namespace stecgd {

namespace detail {

template <typename Range>
std::string json_array(const Range& values) {
  std::string out = "[";
  bool first = true;
  for (double v : values) {
    if (!first) out += ',';
    out += text::format_double(v);
    first = false;
  }
  out += ']';
  return out;
}

inline std::vector<double> row_major(const Matrix& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

inline Matrix from_row_major(const nlohmann::json& arr, Eigen::Index rows, Eigen::Index cols,
                             const char* what) {
  if (!arr.is_array() || arr.size() != static_cast<std::size_t>(rows * cols)) {
    throw ParseError(std::string(what) + " must be an array of " + std::to_string(rows * cols) +
                         " numbers",
                     1);
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = arr[static_cast<std::size_t>(r * cols + c)];
      if (!v.is_number()) throw ParseError(std::string(what) + " holds a non-number", 1);
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const Network& net) {
  out << "{\n"
      << "  \"format\": \"stecgd-checkpoint/1\",\n"
      << "  \"d\": " << net.input_dim() << ",\n"
      << "  \"k\": " << net.units() << ",\n"
      << "  \"n\": " << net.classes() << ",\n"
      << "  \"b\": " << net.quantizer().bits() << ",\n"
      << "  \"V\": " << detail::json_array(detail::row_major(net.second_layer().values())) << ",\n"
      << "  \"W\": " << detail::json_array(detail::row_major(net.weights())) << "\n"
      << "}\n";
}

inline Network read_checkpoint(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("checkpoint is not valid JSON: ") + e.what(), 1);
  }
  try {
    if (doc.value("format", "") != "stecgd-checkpoint/1") {
      throw ParseError("not a stecgd checkpoint", 1);
    }
    const int d = doc.at("d").get<int>();
    const int k = doc.at("k").get<int>();
    const int n = doc.at("n").get<int>();
    const int b = doc.at("b").get<int>();
    if (d < 1 || k < 1 || n < 1) throw ParseError("d, k and n must be positive", 1);
    Matrix v = detail::from_row_major(doc.at("V"), n, k, "V");
    Matrix w = detail::from_row_major(doc.at("W"), d, k, "W");
    return Network(std::move(w), SecondLayer(std::move(v)), Quantizer(b));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), 1);
  }
}

inline void save_checkpoint(const Network& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_checkpoint(out, net);
}

inline Network load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_checkpoint(in);
}

/// One JSON object per logged iteration; the last one names the termination
/// reason, earlier ones carry an empty string.
inline void write_trace(std::ostream& out, const TrainTrace& trace) {
  for (std::size_t r = 0; r < trace.records.size(); ++r) {
    const auto& rec = trace.records[r];
    const bool last = r + 1 == trace.records.size();
    out << "{\"t\":" << rec.t << ",\"loss\":" << text::format_double(rec.loss)
        << ",\"accuracy\":" << text::format_double(rec.accuracy)
        << ",\"grad_norm\":" << text::format_double(rec.grad_norm)
        << ",\"component_norms\":" << detail::json_array(rec.component_norms)
        << ",\"grad_sq_sum\":" << detail::json_array(rec.grad_sq_sum)
        << ",\"weight_norm\":" << text::format_double(rec.weight_norm) << ",\"termination\":\""
        << (last ? to_string(trace.termination) : "") << "\"}\n";
  }
}

/// Matched pairs are not stored in the trace; take them from the checkpoint.
inline TrainTrace read_trace(std::istream& in) {
  TrainTrace trace;
  std::string line;
  std::size_t lineno = 0;
  std::string last_reason;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      TraceRecord rec;
      rec.t = obj.at("t").get<long>();
      rec.loss = obj.at("loss").get<double>();
      rec.accuracy = obj.at("accuracy").get<double>();
      rec.grad_norm = obj.at("grad_norm").get<double>();
      rec.component_norms = obj.at("component_norms").get<std::vector<double>>();
      rec.grad_sq_sum = obj.at("grad_sq_sum").get<std::vector<double>>();
      rec.weight_norm = obj.at("weight_norm").get<double>();
      last_reason = obj.at("termination").get<std::string>();
      if (!trace.records.empty() && rec.t <= trace.records.back().t) {
        throw ParseError("iteration counter is not strictly increasing", lineno);
      }
      trace.max_weight_norm = std::max(trace.max_weight_norm, rec.weight_norm);
      trace.records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("trace record: ") + e.what(), lineno);
    }
  }
  if (trace.records.empty()) throw ParseError("trace is empty", lineno + 1);
  if (last_reason.empty()) throw ParseError("trace has no termination record", lineno);
  try {
    trace.termination = parse_termination(last_reason);
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), lineno);
  }
  trace.iterations = trace.records.back().t;
  if (trace.termination == Termination::ZeroLoss) trace.converged_at = trace.iterations;
  return trace;
}

inline void save_trace(const TrainTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_trace(out, trace);
}

inline TrainTrace load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_trace(in);
}

}  // namespace stecgd
