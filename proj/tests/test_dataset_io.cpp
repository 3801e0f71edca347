#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "aemu/dataset_io.hpp"
#include "aemu/error.hpp"
#include "test_util.hpp"

using namespace aemu;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an aemu::Error");
  return ErrorCode::kUsage;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

bool bit_identical(const SampleBatch& a, const SampleBatch& b) {
  if (a.names != b.names || a.columns.size() != b.columns.size()) return false;
  for (std::size_t c = 0; c < a.columns.size(); ++c) {
    if (a.columns[c].size() != b.columns[c].size()) return false;
    if (std::memcmp(a.columns[c].data(), b.columns[c].data(), a.columns[c].size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("binary round trip is bit-identical") {
  test::TempDir dir("bin");
  const auto& s = builtin_schema();
  SampleBatch b = test::random_batch(Role::kInput, Space::kRaw, 1000, 42);
  b.columns[0][0] = -0.0;
  b.columns[1][0] = 4.9e-324;
  write_table(dir / "x.bin", b, DataFormat::kBinary);
  const SampleBatch back = read_table(dir / "x.bin", DataFormat::kBinary, s, Role::kInput);
  CHECK(bit_identical(b, back));
  CHECK(std::signbit(back.columns[0][0]));
}

TEST_CASE("binary header layout") {
  test::TempDir dir("hdr");
  const auto& s = builtin_schema();
  const SampleBatch b = test::random_batch(Role::kOutput, Space::kRaw, 3, 1);
  write_table(dir / "y.bin", b, DataFormat::kBinary);
  const std::string bytes = slurp(dir / "y.bin");
  REQUIRE(bytes.size() == 4 + 2 + 8 + 2 + 8 + 3 * 28 * 8);
  CHECK(bytes.substr(0, 4) == "AEMU");
  auto le = [&](std::size_t off, std::size_t n) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v |= std::uint64_t(static_cast<unsigned char>(bytes[off + i])) << (8 * i);
    return v;
  };
  CHECK(le(4, 2) == 1);
  CHECK(le(6, 8) == 3);
  CHECK(le(14, 2) == 28);
  CHECK(le(16, 8) == s.role_hash(Role::kOutput));
  // Column-major: the second stored double is row 1 of column 0.
  double v;
  std::memcpy(&v, bytes.data() + 24 + 8, 8);
  CHECK(v == b.columns[0][1]);
}

TEST_CASE("CSV round trip within print precision") {
  test::TempDir dir("csv");
  const auto& s = builtin_schema();
  const SampleBatch b = test::random_batch(Role::kInput, Space::kRaw, 500, 7);
  write_table(dir / "x.csv", b, DataFormat::kCsv);
  const SampleBatch back = read_table(dir / "x.csv", DataFormat::kCsv, s, Role::kInput);
  // Shortest round-trip printing makes this exact in practice.
  CHECK(bit_identical(b, back));
  const std::string text = slurp(dir / "x.csv");
  CHECK(text.find('\r') == std::string::npos);
  CHECK(text.substr(0, text.find('\n')).find("Pressure") == 0);
}

TEST_CASE("CSV header validation") {
  test::TempDir dir("csvhdr");
  const auto& s = builtin_schema();
  const SampleBatch b = test::random_batch(Role::kInput, Space::kRaw, 2, 7);
  write_table(dir / "x.csv", b, DataFormat::kCsv);
  std::string text = slurp(dir / "x.csv");
  const auto& n = s.input_names();
  const std::string swapped = n[1] + "," + n[0];
  text.replace(0, n[0].size() + 1 + n[1].size(), swapped);
  spit(dir / "bad.csv", text);
  CHECK(code_of([&] { read_table(dir / "bad.csv", DataFormat::kCsv, s, Role::kInput); }) == ErrorCode::kOrderMismatch);
  CHECK(code_of([&] { read_table(dir / "x.csv", DataFormat::kCsv, s, Role::kOutput); }) == ErrorCode::kUnknownColumn);
}

TEST_CASE("empty files") {
  test::TempDir dir("empty");
  const auto& s = builtin_schema();
  spit(dir / "e.csv", "");
  spit(dir / "e.bin", "");
  CHECK(code_of([&] { read_table(dir / "e.csv", DataFormat::kCsv, s, Role::kInput); }) == ErrorCode::kEmptyDataset);
  CHECK(code_of([&] { read_table(dir / "e.bin", DataFormat::kBinary, s, Role::kInput); }) == ErrorCode::kEmptyDataset);
  std::string header;
  for (const auto& n : s.input_names()) header += (header.empty() ? "" : ",") + n;
  spit(dir / "h.csv", header + "\n");
  CHECK(code_of([&] { read_table(dir / "h.csv", DataFormat::kCsv, s, Role::kInput); }) == ErrorCode::kEmptyDataset);
}

TEST_CASE("non-finite and malformed entries are rejected with the row index") {
  test::TempDir dir("nonfinite");
  const auto& s = builtin_schema();
  SampleBatch b = test::random_batch(Role::kInput, Space::kRaw, 5, 9);
  write_table(dir / "x.csv", b, DataFormat::kCsv);
  std::string text = slurp(dir / "x.csv");
  // Replace the first field of data row 3 with nan.
  std::size_t pos = 0;
  for (int i = 0; i < 4; ++i) pos = text.find('\n', pos) + 1;
  const std::size_t comma = text.find(',', pos);
  spit(dir / "nan.csv", text.substr(0, pos) + "nan" + text.substr(comma));
  spit(dir / "junk.csv", text.substr(0, pos) + "1.0x" + text.substr(comma));
  for (const char* f : {"nan.csv", "junk.csv"}) {
    try {
      read_table(dir / f, DataFormat::kCsv, s, Role::kInput);
      FAIL("expected rejection");
    } catch (const Error& e) {
      CHECK((e.code() == ErrorCode::kNonFiniteValue || e.code() == ErrorCode::kInvalidValue));
      CHECK(e.subject() == "3");
    }
  }
  b.columns[4][2] = INFINITY;
  CHECK(code_of([&] { write_table(dir / "inf.bin", b, DataFormat::kBinary); }) == ErrorCode::kNonFiniteValue);
}

TEST_CASE("binary corruption") {
  test::TempDir dir("bincorrupt");
  const auto& s = builtin_schema();
  const SampleBatch b = test::random_batch(Role::kInput, Space::kRaw, 10, 3);
  write_table(dir / "x.bin", b, DataFormat::kBinary);
  const std::string bytes = slurp(dir / "x.bin");
  spit(dir / "trunc.bin", bytes.substr(0, bytes.size() - 5));
  CHECK(code_of([&] { read_table(dir / "trunc.bin", DataFormat::kBinary, s, Role::kInput); }) == ErrorCode::kIo);
  spit(dir / "short.bin", bytes.substr(0, 10));
  CHECK(code_of([&] { read_table(dir / "short.bin", DataFormat::kBinary, s, Role::kInput); }) == ErrorCode::kIo);
  std::string v2 = bytes;
  v2[4] = 2;
  spit(dir / "v2.bin", v2);
  CHECK(code_of([&] { read_table(dir / "v2.bin", DataFormat::kBinary, s, Role::kInput); }) == ErrorCode::kVersionMismatch);
  CHECK(code_of([&] { read_table(dir / "x.bin", DataFormat::kBinary, s, Role::kOutput); }) ==
        ErrorCode::kSchemaHashMismatch);
  std::string magic = bytes;
  magic[0] = 'X';
  spit(dir / "magic.bin", magic);
  CHECK(code_of([&] { read_table(dir / "magic.bin", DataFormat::kBinary, s, Role::kInput); }) == ErrorCode::kInvalidValue);
  CHECK(code_of([&] { read_table(dir / "missing.bin", DataFormat::kBinary, s, Role::kInput); }) == ErrorCode::kIo);
}

TEST_CASE("dataset directory round trip in both formats") {
  test::TempDir dir("ds");
  const auto& s = builtin_schema();
  const Dataset d{test::random_batch(Role::kInput, Space::kRaw, 64, 1),
                  test::random_batch(Role::kOutput, Space::kRaw, 64, 2)};
  for (DataFormat f : {DataFormat::kBinary, DataFormat::kCsv}) {
    const fs::path sub = dir / std::string(to_string(f));
    write_dataset(sub, d, f);
    CHECK(fs::exists(dataset_inputs_path(sub, f)));
    CHECK(fs::exists(dataset_outputs_path(sub, f)));
    const Dataset back = read_dataset(sub, f, s);
    CHECK(bit_identical(back.inputs, d.inputs));
    CHECK(bit_identical(back.outputs, d.outputs));
  }
  const Dataset bad{test::random_batch(Role::kInput, Space::kRaw, 3, 1),
                    test::random_batch(Role::kOutput, Space::kRaw, 4, 2)};
  CHECK(code_of([&] { write_dataset(dir / "bad", bad, DataFormat::kBinary); }) == ErrorCode::kRowCountMismatch);
}

TEST_CASE("format helpers") {
  CHECK(parse_format("csv") == DataFormat::kCsv);
  CHECK(parse_format("binary") == DataFormat::kBinary);
  CHECK(code_of([] { parse_format("xml"); }) == ErrorCode::kUsage);
  CHECK(format_for_path("a/b.csv") == DataFormat::kCsv);
  CHECK(format_for_path("a/b.bin") == DataFormat::kBinary);
}

TEST_CASE("atomic write leaves no temporary file") {
  test::TempDir dir("atomic");
  write_file_atomic(dir / "f.txt", "hello");
  write_file_atomic(dir / "f.txt", "world");
  CHECK(slurp(dir / "f.txt") == "world");
  CHECK_FALSE(fs::exists(dir / "f.txt.tmp"));
}
