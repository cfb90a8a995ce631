#pragma once

#include "tspipe/dataset.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace tspipe {

using CsvRow = std::vector<std::string>;

/// Reads a whole file, transparently decompressing `.gz` paths.
std::string read_text_file(const std::filesystem::path& path);
/// Writes a whole file, gzip-compressing when the path ends in `.gz`.
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// RFC-4180 parse: quoted fields may hold commas, doubled quotes and newlines.
/// Each row carries the 1-based line number it started on.
struct CsvRecord {
  CsvRow fields;
  std::size_t line = 0;
};
std::vector<CsvRecord> parse_csv(const std::string& text);
std::string csv_escape(const std::string& field);
std::string format_number(double v);
bool parse_number(const std::string& s, double& out);

/// Loads a wide static file (`id,<feature>,...`) and an EAV temporal file
/// (`id,time,variable,value`) into a Dataset. Instance order follows the
/// static file; temporal feature order follows first appearance; the grid of
/// each instance is its sorted distinct timestamps.
Dataset load_csv(const std::filesystem::path& static_path, const std::filesystem::path& temporal_path);

/// Inverse of load_csv for the raw (pre-problem) part of a dataset.
void write_csv(const Dataset& dataset, const std::filesystem::path& static_path,
               const std::filesystem::path& temporal_path);

}  // namespace tspipe
