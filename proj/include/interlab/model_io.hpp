#pragma once

#include <string>

#include "interlab/model.hpp"

namespace interlab {

// Model files are JSON: a header with magic/"format_version"/dims plus one
// object per layer, dense weights carried as base64 little-endian f64.
// Errors: IoError (unreadable), MalformedFileError (not JSON / truncated
// payload), FormatError (wrong magic or unknown format_version).
void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

std::string model_to_json(const Model& m);
Model model_from_json(const std::string& text);

// Exposed for tests and the trace blob writer.
std::string base64_encode(const unsigned char* data, std::size_t len);
std::string base64_decode(const std::string& text);

}  // namespace interlab
