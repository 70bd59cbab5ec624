#pragma once

#include <json.hpp>
#include <string>

#include "truncest/model_types.hpp"

namespace truncest {

using json = nlohmann::json;

/// Dense CSV with a `# dims: <rows> <cols>` header line, row-major, %.17g.
void write_matrix_csv(const std::string& path, const Matrix& m);
Matrix read_matrix_csv(const std::string& path);

/// Box and interval-union oracles round-trip through JSON; infinite endpoints
/// are written as the strings "-inf"/"inf". Full-space serializes as an
/// all-infinite box. Generic oracles are rejected.
json oracle_to_json(const TruncationOracle& oracle);
TruncationOracle oracle_from_json(const json& j);

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

struct BatchMeta {
  uint64_t seed = 0;
  double accept_rate = 1.0;
  json oracle;
};

void write_batch_meta(const std::string& path, const BatchMeta& meta);
BatchMeta read_batch_meta(const std::string& path);

}  // namespace truncest
