#pragma once

// Single-file model checkpoints: a text header (config, vocabulary, word list,
// tensor manifest) followed by little-endian float32 tensor data.

#include <iosfwd>
#include <string>

#include "topdep/model.hpp"

namespace topdep {

void write_checkpoint(std::ostream& out, const Model& model);
Model read_checkpoint(std::istream& in);

void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(const std::string& path);

}  // namespace topdep
