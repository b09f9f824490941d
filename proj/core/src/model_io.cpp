#include "mapkit/model_io.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

namespace mapkit {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::BadModelFile, what); }

void reject_unknown_keys(const json& doc, const std::set<std::string>& allowed) {
  for (const auto& item : doc.items()) {
    if (!allowed.contains(item.key())) bad("unknown key \"" + item.key() + "\"");
  }
}

Matrix parse_matrix(const json& value, int n, const std::string& name) {
  if (!value.is_array() || value.size() != static_cast<size_t>(n)) {
    bad(name + " must be an array of " + std::to_string(n) + " rows");
  }
  Matrix out(n, n);
  for (int i = 0; i < n; ++i) {
    const json& row = value[static_cast<size_t>(i)];
    if (!row.is_array() || row.size() != static_cast<size_t>(n)) {
      bad(name + " row " + std::to_string(i) + " must have " + std::to_string(n) + " entries");
    }
    for (int j = 0; j < n; ++j) {
      const json& cell = row[static_cast<size_t>(j)];
      if (!cell.is_number()) bad(name + " has a non-numeric entry");
      out(i, j) = cell.get<double>();
      if (!std::isfinite(out(i, j))) bad(name + " has a non-finite entry");
    }
  }
  return out;
}

Vector parse_vector(const json& value, int n, const std::string& name) {
  if (!value.is_array() || value.size() != static_cast<size_t>(n)) {
    bad(name + " must be an array of " + std::to_string(n) + " numbers");
  }
  Vector out(n);
  for (int i = 0; i < n; ++i) {
    const json& cell = value[static_cast<size_t>(i)];
    if (!cell.is_number()) bad(name + " has a non-numeric entry");
    out(i) = cell.get<double>();
    if (!std::isfinite(out(i))) bad(name + " has a non-finite entry");
  }
  return out;
}

int parse_phases(const json& doc) {
  if (!doc.contains("phases") || !doc["phases"].is_number_integer()) {
    bad("\"phases\" must be a positive integer");
  }
  const long n = doc["phases"].get<long>();
  if (n < 1 || n > 4096) bad("\"phases\" out of range");
  return static_cast<int>(n);
}

Model parse_lattice(const json& doc) {
  reject_unknown_keys(doc, {"type", "phases", "blocks", "extra_killing"});
  const int n = parse_phases(doc);
  if (!doc.contains("blocks") || !doc["blocks"].is_object()) bad("\"blocks\" must be an object");

  int max_jump = -1;
  for (const auto& item : doc["blocks"].items()) {
    long m = 0;
    try {
      size_t pos = 0;
      m = std::stol(item.key(), &pos);
      if (pos != item.key().size()) bad("block key \"" + item.key() + "\" is not an integer");
    } catch (const std::exception&) {
      bad("block key \"" + item.key() + "\" is not an integer");
    }
    if (m < -1 || m > 4096) bad("block index " + item.key() + " out of range");
    max_jump = std::max(max_jump, static_cast<int>(m));
  }
  if (!doc["blocks"].contains("-1") || !doc["blocks"].contains("0")) {
    bad("blocks \"-1\" and \"0\" are required");
  }

  std::vector<Matrix> blocks(static_cast<size_t>(max_jump) + 2, Matrix::Zero(n, n));
  for (const auto& item : doc["blocks"].items()) {
    const long m = std::stol(item.key());
    blocks[static_cast<size_t>(m + 1)] = parse_matrix(item.value(), n, "blocks[" + item.key() + "]");
  }

  LatticeModel model = LatticeModel::create(std::move(blocks));
  if (doc.contains("extra_killing")) {
    model = model.with_killing(parse_vector(doc["extra_killing"], n, "extra_killing"));
  }
  return model;
}

Model parse_mmbm(const json& doc) {
  reject_unknown_keys(doc, {"type", "phases", "drift", "sigma2", "Q", "extra_killing"});
  const int n = parse_phases(doc);
  for (const char* key : {"drift", "sigma2", "Q"}) {
    if (!doc.contains(key)) bad(std::string("\"") + key + "\" is required");
  }
  MmbmModel model = MmbmModel::create(parse_vector(doc["drift"], n, "drift"),
                                      parse_vector(doc["sigma2"], n, "sigma2"),
                                      parse_matrix(doc["Q"], n, "Q"));
  if (doc.contains("extra_killing")) {
    model = model.with_killing(parse_vector(doc["extra_killing"], n, "extra_killing"));
  }
  return model;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

Model parse_model_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    bad(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) bad("model file must hold a JSON object");
  if (!doc.contains("type") || !doc["type"].is_string()) bad("\"type\" must be a string");
  const std::string type = doc["type"].get<std::string>();
  if (type == "lattice") return parse_lattice(doc);
  if (type == "mmbm") return parse_mmbm(doc);
  bad("\"type\" must be \"lattice\" or \"mmbm\"");
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad("cannot open model file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_model_json(buffer.str());
}

std::string content_hash(const std::string& bytes) {
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::string model_to_json(const Model& model) {
  json doc;
  if (const auto* lattice = std::get_if<LatticeModel>(&model)) {
    doc["type"] = "lattice";
    doc["phases"] = lattice->phases();
    json blocks = json::object();
    for (int m = -1; m <= lattice->max_jump(); ++m) {
      blocks[std::to_string(m)] = matrix_to_json(lattice->block(m));
    }
    doc["blocks"] = std::move(blocks);
  } else {
    const auto& mmbm = std::get<MmbmModel>(model);
    doc["type"] = "mmbm";
    doc["phases"] = mmbm.phases();
    doc["drift"] = json::array();
    doc["sigma2"] = json::array();
    for (int i = 0; i < mmbm.phases(); ++i) {
      doc["drift"].push_back(mmbm.drift()(i));
      doc["sigma2"].push_back(mmbm.variance()(i));
    }
    doc["Q"] = matrix_to_json(mmbm.generator());
  }
  return doc.dump(2);
}

}  // namespace mapkit
