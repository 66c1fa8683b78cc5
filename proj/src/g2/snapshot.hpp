#pragma once

// G2SNAP01 binary field snapshots, sidecar metadata and atomic file output.
//
// Layout (little-endian): "G2SNAP01", u32 k, k x u32 axis id (1-based),
// k x u32 N, k x f64 L, u32 value descriptor, then f64 payload in point order
// with the canonical component order of the value type.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "g2/grid.hpp"

namespace g2 {

enum class ValueKind : std::uint32_t {
  scalar = 0,
  vec7 = 1,
  sym7 = 2,  // 28 entries, upper triangle row by row
  three_form = 3,
  four_form = 4,
  mat7 = 5,  // 49 entries, row-major
};

int value_width(ValueKind kind);
const char* value_kind_name(ValueKind kind);

struct Snapshot {
  Grid grid;
  ValueKind kind = ValueKind::scalar;
  std::vector<double> data;  // grid.size() * value_width(kind)
};

void write_snapshot(const std::string& path, const Snapshot& snap);
/// Period lengths of inactive axes are not part of the binary format.
Snapshot read_snapshot(const std::string& path,
                       const std::array<double, kDim>& inactive_periods = Grid::unit_periods());

Snapshot to_snapshot(const Field<double>& f);
Snapshot to_snapshot(const Field<Vec7>& f);
Snapshot to_snapshot(const Field<SymMat7>& f);
Snapshot to_snapshot(const Field<ThreeForm>& f);
Snapshot to_snapshot(const Field<FourForm>& f);
Snapshot to_snapshot(const Field<Mat7>& f);

template <class V>
Field<V> from_snapshot(const Snapshot& snap);
template <> Field<double> from_snapshot<double>(const Snapshot& snap);
template <> Field<Vec7> from_snapshot<Vec7>(const Snapshot& snap);
template <> Field<SymMat7> from_snapshot<SymMat7>(const Snapshot& snap);
template <> Field<ThreeForm> from_snapshot<ThreeForm>(const Snapshot& snap);
template <> Field<FourForm> from_snapshot<FourForm>(const Snapshot& snap);
template <> Field<Mat7> from_snapshot<Mat7>(const Snapshot& snap);

/// Ordered key = value metadata; values are stored as written.
using Metadata = std::map<std::string, std::string>;

void write_metadata(const std::string& path, const Metadata& meta);
Metadata read_metadata(const std::string& path);

/// %.17g formatting for every floating-point value written to text outputs.
std::string format_double(double v);

/// Writes content to path via a temporary sibling and a rename.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);
bool file_exists(const std::string& path);

}  // namespace g2
