#pragma once

#include <iosfwd>
#include <string>

#include "ctes/data.hpp"

namespace ctes {

enum class FileFormat { csv, jsonl };

FileFormat format_from_string(const std::string& s);

// Rows are grouped by seq_id and sorted by time within each sequence.
// The vocabulary is built from distinct mark strings in first-appearance order.
Dataset parse_dataset(std::istream& in, FileFormat format);
Dataset load_dataset(const std::string& path, FileFormat format);
Dataset load_dataset(const std::string& path);  // format from extension

void serialize_dataset(const Dataset& ds, std::ostream& out, FileFormat format);
void save_dataset(const Dataset& ds, const std::string& path, FileFormat format);

}  // namespace ctes
