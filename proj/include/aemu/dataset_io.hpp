#pragma once

#include <cstdint>
#include <filesystem>

#include "aemu/pipeline.hpp"
#include "aemu/schema.hpp"

namespace aemu {

enum class DataFormat { kCsv, kBinary };

DataFormat parse_format(std::string_view text);
std::string_view to_string(DataFormat format);
std::string_view file_extension(DataFormat format);
/// ".csv" -> kCsv, anything else -> kBinary.
DataFormat format_for_path(const std::filesystem::path& path);

/// Binary table layout, little-endian throughout:
///   "AEMU" | u16 version | u64 rows | u16 cols | u64 schema_hash | f64[cols][rows]
/// schema_hash is fnv1a_names() of the table's column names.
inline constexpr char kDatasetMagic[4] = {'A', 'E', 'M', 'U'};
inline constexpr std::uint16_t kDatasetVersion = 1;

/// Single table of one role. CSV: header of schema names, shortest
/// round-trip decimal floats, LF line endings.
void write_table(const std::filesystem::path& path, const SampleBatch& batch, DataFormat format);
SampleBatch read_table(const std::filesystem::path& path, DataFormat format, const VariableSchema& schema, Role role);

/// A dataset is a directory holding inputs.<ext> and outputs.<ext>
/// (raw states before and after one step).
std::filesystem::path dataset_inputs_path(const std::filesystem::path& dir, DataFormat format);
std::filesystem::path dataset_outputs_path(const std::filesystem::path& dir, DataFormat format);

void write_dataset(const std::filesystem::path& dir, const Dataset& data, DataFormat format);
Dataset read_dataset(const std::filesystem::path& dir, DataFormat format, const VariableSchema& schema);

/// Writes to a sibling temporary file then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace aemu
