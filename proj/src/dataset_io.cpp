#include "aemu/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "aemu/error.hpp"
#include "byte_io.hpp"

namespace aemu {

namespace fs = std::filesystem;

DataFormat parse_format(std::string_view text) {
  if (text == "csv") return DataFormat::kCsv;
  if (text == "binary" || text == "bin") return DataFormat::kBinary;
  throw Error(ErrorCode::kUsage, "unknown data format '" + std::string(text) + "' (expected csv|binary)");
}

std::string_view to_string(DataFormat format) { return format == DataFormat::kCsv ? "csv" : "binary"; }
std::string_view file_extension(DataFormat format) { return format == DataFormat::kCsv ? ".csv" : ".bin"; }

DataFormat format_for_path(const fs::path& path) {
  return path.extension() == ".csv" ? DataFormat::kCsv : DataFormat::kBinary;
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, "write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

std::string encode_binary(const SampleBatch& batch) {
  detail::ByteWriter w;
  w.buffer().reserve(26 + batch.n_rows() * batch.n_cols() * 8);
  w.put_bytes(std::string_view(kDatasetMagic, 4));
  w.put<std::uint16_t>(kDatasetVersion);
  w.put<std::uint64_t>(batch.n_rows());
  w.put<std::uint16_t>(static_cast<std::uint16_t>(batch.n_cols()));
  w.put<std::uint64_t>(fnv1a_names(batch.names));
  for (const auto& col : batch.columns) {
    for (double v : col) w.put(v);
  }
  return std::move(w.buffer());
}

std::string encode_csv(const SampleBatch& batch) {
  std::string out;
  for (std::size_t c = 0; c < batch.names.size(); ++c) {
    if (c) out += ',';
    out += batch.names[c];
  }
  out += '\n';
  char buf[64];
  for (std::size_t r = 0; r < batch.n_rows(); ++r) {
    for (std::size_t c = 0; c < batch.columns.size(); ++c) {
      if (c) out += ',';
      auto res = std::to_chars(buf, buf + sizeof(buf), batch.columns[c][r]);
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    parts.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

SampleBatch decode_csv(std::string_view text, const fs::path& path, const VariableSchema& schema, Role role) {
  std::vector<std::string_view> lines;
  for (auto line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw Error(ErrorCode::kEmptyDataset, "'" + path.string() + "' is empty");

  std::vector<std::string> header;
  for (auto field : split(lines.front(), ',')) header.emplace_back(field);
  validate_columns(schema, header, role);
  if (lines.size() == 1) throw Error(ErrorCode::kEmptyDataset, "'" + path.string() + "' has a header but no rows");

  SampleBatch batch(schema, role, Space::kRaw, lines.size() - 1);
  for (std::size_t r = 0; r + 1 < lines.size(); ++r) {
    auto fields = split(lines[r + 1], ',');
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::kInvalidValue,
                  "row " + std::to_string(r) + " has " + std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()),
                  std::to_string(r));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double v = 0.0;
      auto f = fields[c];
      auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw Error(ErrorCode::kInvalidValue,
                    "cannot parse '" + std::string(f) + "' at row " + std::to_string(r) + ", column '" + header[c] + "'",
                    std::to_string(r));
      }
      batch.columns[c][r] = v;
    }
  }
  return batch;
}

SampleBatch decode_binary(std::string_view bytes, const fs::path& path, const VariableSchema& schema, Role role) {
  if (bytes.empty()) throw Error(ErrorCode::kEmptyDataset, "'" + path.string() + "' is empty");
  detail::ByteReader rd(bytes, ErrorCode::kIo);
  if (rd.get_bytes(4) != std::string_view(kDatasetMagic, 4)) {
    throw Error(ErrorCode::kInvalidValue, "'" + path.string() + "' is not an AEMU dataset");
  }
  const auto version = rd.get<std::uint16_t>();
  if (version != kDatasetVersion) {
    throw Error(ErrorCode::kVersionMismatch, "'" + path.string() + "' has format version " + std::to_string(version));
  }
  const auto rows = rd.get<std::uint64_t>();
  const auto cols = rd.get<std::uint16_t>();
  const auto hash = rd.get<std::uint64_t>();
  const auto& names = schema.names(role);
  if (cols != names.size() || hash != schema.role_hash(role)) {
    throw Error(ErrorCode::kSchemaHashMismatch, "'" + path.string() + "' columns do not match the schema " +
                                                    std::string(to_string(role)) + " variables");
  }
  if (rows == 0) throw Error(ErrorCode::kEmptyDataset, "'" + path.string() + "' has no rows");
  if (rd.remaining() % (8 * cols) != 0 || rd.remaining() / (8 * cols) != rows) {
    throw Error(ErrorCode::kIo, "'" + path.string() + "' payload size does not match " + std::to_string(rows) +
                                    " rows x " + std::to_string(cols) + " columns");
  }
  SampleBatch batch(schema, role, Space::kRaw, rows);
  for (auto& col : batch.columns) {
    for (auto& v : col) v = rd.get<double>();
  }
  return batch;
}

}  // namespace

void write_table(const fs::path& path, const SampleBatch& batch, DataFormat format) {
  batch.check_finite_and_rectangular();
  write_file_atomic(path, format == DataFormat::kCsv ? encode_csv(batch) : encode_binary(batch));
}

SampleBatch read_table(const fs::path& path, DataFormat format, const VariableSchema& schema, Role role) {
  const std::string bytes = read_file(path);
  SampleBatch batch =
      format == DataFormat::kCsv ? decode_csv(bytes, path, schema, role) : decode_binary(bytes, path, schema, role);
  batch.check_finite_and_rectangular();
  return batch;
}

fs::path dataset_inputs_path(const fs::path& dir, DataFormat format) {
  return dir / ("inputs" + std::string(file_extension(format)));
}

fs::path dataset_outputs_path(const fs::path& dir, DataFormat format) {
  return dir / ("outputs" + std::string(file_extension(format)));
}

void write_dataset(const fs::path& dir, const Dataset& data, DataFormat format) {
  if (data.inputs.n_rows() != data.outputs.n_rows()) {
    throw Error(ErrorCode::kRowCountMismatch, "inputs and outputs differ in row count");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create '" + dir.string() + "': " + ec.message());
  write_table(dataset_inputs_path(dir, format), data.inputs, format);
  write_table(dataset_outputs_path(dir, format), data.outputs, format);
}

Dataset read_dataset(const fs::path& dir, DataFormat format, const VariableSchema& schema) {
  Dataset data{read_table(dataset_inputs_path(dir, format), format, schema, Role::kInput),
               read_table(dataset_outputs_path(dir, format), format, schema, Role::kOutput)};
  if (data.inputs.n_rows() != data.outputs.n_rows()) {
    throw Error(ErrorCode::kRowCountMismatch, "'" + dir.string() + "': inputs have " +
                                                  std::to_string(data.inputs.n_rows()) + " rows, outputs have " +
                                                  std::to_string(data.outputs.n_rows()));
  }
  return data;
}

}  // namespace aemu
