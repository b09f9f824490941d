#pragma once

#include <string>

#include "mapkit/model.hpp"

namespace mapkit {

// Parses the model file format: a single JSON document with "type" equal to
// "lattice" or "mmbm". Unknown keys are rejected. An optional "extra_killing"
// vector is applied through with_killing.
Model parse_model_json(const std::string& text);
Model load_model(const std::string& path);

// FNV-1a over the raw file bytes, hex encoded; echoed into CLI output so
// results are traceable to their input.
std::string content_hash(const std::string& bytes);

std::string model_to_json(const Model& model);

}  // namespace mapkit
