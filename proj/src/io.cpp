#include "truncest/io.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace truncest {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

json endpoint_to_json(double x) {
  if (x == kInf) return "inf";
  if (x == -kInf) return "-inf";
  return x;
}

double endpoint_from_json(const json& j, const char* field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  throw BadConfig(std::string("oracle.") + field +
                  ": expected number or \"±inf\" sentinel");
}

}  // namespace

void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "# dims: " << m.rows() << " " << m.cols() << "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_g17(m(i, j));
    }
    out << '\n';
  }
}

Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string header;
  std::getline(in, header);
  Eigen::Index rows = 0, cols = 0;
  if (std::sscanf(header.c_str(), "# dims: %ld %ld", &rows, &cols) != 2 ||
      rows < 0 || cols < 0) {
    throw std::runtime_error("bad matrix header in " + path);
  }
  Matrix m(rows, cols);
  std::string line;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) {
      throw std::runtime_error("truncated matrix file: " + path);
    }
    std::stringstream ss(line);
    std::string cell;
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!std::getline(ss, cell, ',')) {
        throw std::runtime_error("short row in matrix file: " + path);
      }
      m(i, j) = std::stod(cell);
    }
  }
  return m;
}

json oracle_to_json(const TruncationOracle& oracle) {
  switch (oracle.kind()) {
    case TruncationOracle::Kind::kFullSpace: {
      json lo = json::array(), hi = json::array();
      for (int i = 0; i < oracle.dimension(); ++i) {
        lo.push_back("-inf");
        hi.push_back("inf");
      }
      return json{{"kind", "box"}, {"lo", lo}, {"hi", hi}};
    }
    case TruncationOracle::Kind::kBox: {
      json lo = json::array(), hi = json::array();
      for (int i = 0; i < oracle.dimension(); ++i) {
        lo.push_back(endpoint_to_json(oracle.box_lo()[i]));
        hi.push_back(endpoint_to_json(oracle.box_hi()[i]));
      }
      return json{{"kind", "box"}, {"lo", lo}, {"hi", hi}};
    }
    case TruncationOracle::Kind::kIntervals: {
      json segs = json::array();
      const IntervalUnion u = oracle.as_interval_union();
      for (const auto& [a, b] : u.segments()) {
        segs.push_back(json::array({endpoint_to_json(a), endpoint_to_json(b)}));
      }
      return json{{"kind", "intervals"}, {"segments", segs}};
    }
    case TruncationOracle::Kind::kGeneric:
      throw BadConfig("generic oracles cannot be serialized");
  }
  throw BadConfig("unknown oracle kind");
}

TruncationOracle oracle_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind")) {
    throw BadConfig("oracle: missing 'kind'");
  }
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "box") {
    if (!j.contains("lo") || !j.contains("hi")) {
      throw BadConfig("oracle: box requires 'lo' and 'hi'");
    }
    const auto& jlo = j.at("lo");
    const auto& jhi = j.at("hi");
    if (!jlo.is_array() || !jhi.is_array() || jlo.size() != jhi.size() ||
        jlo.empty()) {
      throw BadConfig("oracle: lo/hi must be equal-length nonempty arrays");
    }
    Vector lo(jlo.size()), hi(jhi.size());
    bool all_infinite = true;
    for (size_t i = 0; i < jlo.size(); ++i) {
      lo[i] = endpoint_from_json(jlo[i], "lo");
      hi[i] = endpoint_from_json(jhi[i], "hi");
      if (std::isfinite(lo[i]) || std::isfinite(hi[i])) all_infinite = false;
      if (!(lo[i] < hi[i])) {
        throw BadConfig("oracle.lo[" + std::to_string(i) +
                        "] must be < oracle.hi[" + std::to_string(i) + "]");
      }
    }
    if (all_infinite) {
      return TruncationOracle::full_space(static_cast<int>(jlo.size()));
    }
    return TruncationOracle::box(std::move(lo), std::move(hi));
  }
  if (kind == "intervals") {
    if (!j.contains("segments") || !j.at("segments").is_array()) {
      throw BadConfig("oracle: intervals requires 'segments' array");
    }
    std::vector<IntervalUnion::Segment> segs;
    for (const auto& s : j.at("segments")) {
      if (!s.is_array() || s.size() != 2) {
        throw BadConfig("oracle.segments entries must be [a, b] pairs");
      }
      segs.emplace_back(endpoint_from_json(s[0], "segments"),
                        endpoint_from_json(s[1], "segments"));
    }
    return TruncationOracle::intervals(IntervalUnion(std::move(segs)));
  }
  throw BadConfig("oracle.kind must be 'box' or 'intervals'");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw BadConfig("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

void write_batch_meta(const std::string& path, const BatchMeta& meta) {
  write_json_file(path, json{{"seed", meta.seed},
                             {"accept_rate", meta.accept_rate},
                             {"oracle", meta.oracle}});
}

BatchMeta read_batch_meta(const std::string& path) {
  const json j = read_json_file(path);
  BatchMeta meta;
  meta.seed = j.at("seed").get<uint64_t>();
  meta.accept_rate = j.at("accept_rate").get<double>();
  meta.oracle = j.at("oracle");
  return meta;
}

}  // namespace truncest
