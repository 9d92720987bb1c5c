#pragma once

#include "manppa/types.hpp"

#include <filesystem>
#include <string>

namespace manppa {

// Shortest decimal representation that round-trips to the same double.
// Used for every CSV/JSON number we write so that identical values always
// serialize to identical bytes.
std::string format_double(double value);

// Writes M as plain CSV: one matrix row per line, comma separated, no header.
void write_matrix_csv(const std::filesystem::path& path, const Matrix& M);

// Reads a matrix written by write_matrix_csv; dimensions are inferred.
// Throws IoError on missing files, parse failures or ragged rows.
Matrix read_matrix_csv(const std::filesystem::path& path);

// Reads an entire file into a string (throws IoError when unreadable).
std::string read_text_file(const std::filesystem::path& path);

// Writes text atomically enough for our purposes (truncate + write).
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace manppa
