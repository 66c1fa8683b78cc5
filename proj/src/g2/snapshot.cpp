#include "g2/snapshot.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace g2 {

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'G', '2', 'S', 'N', 'A', 'P', '0', '1'};

class Writer {
 public:
  void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& data, const std::string& path) : data_(data), path_(path) {}
  void raw(void* p, std::size_t n) {
    if (pos_ + n > data_.size()) throw Error(ErrorCode::Io, "truncated snapshot " + path_);
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    raw(&v, sizeof v);
    return v;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  const std::string& data_;
  std::string path_;
  std::size_t pos_ = 0;
};

template <class V, class F>
Snapshot pack(const Field<V>& f, ValueKind kind, F emit) {
  Snapshot s{f.grid(), kind, {}};
  s.data.reserve(f.size() * value_width(kind));
  for (const auto& v : f.values()) emit(v, s.data);
  return s;
}

void check_kind(const Snapshot& s, ValueKind want) {
  if (s.kind != want)
    throw Error(ErrorCode::Io, std::string("snapshot holds ") + value_kind_name(s.kind) + ", expected " +
                                   value_kind_name(want));
}

}  // namespace

int value_width(ValueKind kind) {
  switch (kind) {
    case ValueKind::scalar: return 1;
    case ValueKind::vec7: return 7;
    case ValueKind::sym7: return 28;
    case ValueKind::three_form: return 35;
    case ValueKind::four_form: return 35;
    case ValueKind::mat7: return 49;
  }
  throw Error(ErrorCode::Io, "unknown snapshot value descriptor");
}

const char* value_kind_name(ValueKind kind) {
  switch (kind) {
    case ValueKind::scalar: return "scalar";
    case ValueKind::vec7: return "vec7";
    case ValueKind::sym7: return "sym7";
    case ValueKind::three_form: return "three_form";
    case ValueKind::four_form: return "four_form";
    case ValueKind::mat7: return "mat7";
  }
  return "unknown";
}

void write_snapshot(const std::string& path, const Snapshot& snap) {
  if (snap.data.size() != snap.grid.size() * static_cast<std::size_t>(value_width(snap.kind)))
    throw Error(ErrorCode::InvalidArgument, "snapshot payload does not match its grid");
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  const int k = snap.grid.dimension();
  w.u32(static_cast<std::uint32_t>(k));
  for (int s = 0; s < k; ++s) w.u32(static_cast<std::uint32_t>(snap.grid.axis(s).coord + 1));
  for (int s = 0; s < k; ++s) w.u32(static_cast<std::uint32_t>(snap.grid.axis(s).n));
  for (int s = 0; s < k; ++s) w.f64(snap.grid.axis(s).length);
  w.u32(static_cast<std::uint32_t>(snap.kind));
  w.raw(snap.data.data(), snap.data.size() * sizeof(double));
  write_file_atomic(path, w.str());
}

Snapshot read_snapshot(const std::string& path, const std::array<double, kDim>& inactive_periods) {
  const std::string data = read_file(path);
  Reader r(data, path);
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw Error(ErrorCode::Io, "not a G2SNAP01 file: " + path);
  const std::uint32_t k = r.u32();
  if (k < 1 || k > 3) throw Error(ErrorCode::Io, "bad axis count in " + path);
  std::vector<int> coords(k), n(k);
  std::vector<double> len(k);
  for (auto& c : coords) {
    const std::uint32_t id = r.u32();
    if (id < 1 || id > 7) throw Error(ErrorCode::Io, "bad axis id in " + path);
    c = static_cast<int>(id) - 1;
  }
  for (auto& v : n) v = static_cast<int>(r.u32());
  for (auto& v : len) v = r.f64();
  const std::uint32_t desc = r.u32();
  if (desc > 5) throw Error(ErrorCode::Io, "bad value descriptor in " + path);
  Snapshot s;
  try {
    s.grid = Grid(coords, n, len, inactive_periods);
  } catch (const Error& e) {
    throw Error(ErrorCode::Io, std::string("bad grid in ") + path + ": " + e.what());
  }
  s.kind = static_cast<ValueKind>(desc);
  const std::size_t count = s.grid.size() * value_width(s.kind);
  if (r.remaining() != count * sizeof(double)) throw Error(ErrorCode::Io, "payload size mismatch in " + path);
  s.data.resize(count);
  r.raw(s.data.data(), count * sizeof(double));
  return s;
}

Snapshot to_snapshot(const Field<double>& f) {
  return pack(f, ValueKind::scalar, [](double v, std::vector<double>& out) { out.push_back(v); });
}

Snapshot to_snapshot(const Field<Vec7>& f) {
  return pack(f, ValueKind::vec7, [](const Vec7& v, std::vector<double>& out) {
    for (int i = 0; i < kDim; ++i) out.push_back(v[i]);
  });
}

Snapshot to_snapshot(const Field<SymMat7>& f) {
  return pack(f, ValueKind::sym7, [](const SymMat7& v, std::vector<double>& out) {
    for (int i = 0; i < kDim; ++i)
      for (int j = i; j < kDim; ++j) out.push_back(v(i, j));
  });
}

Snapshot to_snapshot(const Field<ThreeForm>& f) {
  return pack(f, ValueKind::three_form, [](const ThreeForm& v, std::vector<double>& out) {
    for (double c : v.components()) out.push_back(c);
  });
}

Snapshot to_snapshot(const Field<FourForm>& f) {
  return pack(f, ValueKind::four_form, [](const FourForm& v, std::vector<double>& out) {
    for (double c : v.components()) out.push_back(c);
  });
}

Snapshot to_snapshot(const Field<Mat7>& f) {
  return pack(f, ValueKind::mat7, [](const Mat7& v, std::vector<double>& out) {
    for (int i = 0; i < kDim; ++i)
      for (int j = 0; j < kDim; ++j) out.push_back(v(i, j));
  });
}

template <>
Field<double> from_snapshot<double>(const Snapshot& s) {
  check_kind(s, ValueKind::scalar);
  Field<double> f(s.grid);
  for (std::size_t p = 0; p < f.size(); ++p) f[p] = s.data[p];
  return f;
}

template <>
Field<Vec7> from_snapshot<Vec7>(const Snapshot& s) {
  check_kind(s, ValueKind::vec7);
  Field<Vec7> f(s.grid);
  for (std::size_t p = 0; p < f.size(); ++p)
    for (int i = 0; i < kDim; ++i) f[p][i] = s.data[p * 7 + i];
  return f;
}

template <>
Field<SymMat7> from_snapshot<SymMat7>(const Snapshot& s) {
  check_kind(s, ValueKind::sym7);
  Field<SymMat7> f(s.grid);
  for (std::size_t p = 0; p < f.size(); ++p) {
    Mat7 m;
    int c = 0;
    for (int i = 0; i < kDim; ++i)
      for (int j = i; j < kDim; ++j) m(i, j) = m(j, i) = s.data[p * 28 + c++];
    f[p] = SymMat7::from_trusted(m);
  }
  return f;
}

template <>
Field<ThreeForm> from_snapshot<ThreeForm>(const Snapshot& s) {
  check_kind(s, ValueKind::three_form);
  Field<ThreeForm> f(s.grid);
  for (std::size_t p = 0; p < f.size(); ++p)
    for (int i = 0; i < 35; ++i) f[p][i] = s.data[p * 35 + i];
  return f;
}

template <>
Field<FourForm> from_snapshot<FourForm>(const Snapshot& s) {
  check_kind(s, ValueKind::four_form);
  Field<FourForm> f(s.grid);
  for (std::size_t p = 0; p < f.size(); ++p)
    for (int i = 0; i < 35; ++i) f[p][i] = s.data[p * 35 + i];
  return f;
}

template <>
Field<Mat7> from_snapshot<Mat7>(const Snapshot& s) {
  check_kind(s, ValueKind::mat7);
  Field<Mat7> f(s.grid);
  for (std::size_t p = 0; p < f.size(); ++p)
    for (int i = 0; i < kDim; ++i)
      for (int j = 0; j < kDim; ++j) f[p](i, j) = s.data[p * 49 + i * 7 + j];
  return f;
}

void write_metadata(const std::string& path, const Metadata& meta) {
  std::string out;
  for (const auto& [k, v] : meta) out += k + " = " + v + "\n";
  write_file_atomic(path, out);
}

Metadata read_metadata(const std::string& path) {
  std::istringstream in(read_file(path));
  Metadata meta;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    meta[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return meta;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open " + tmp + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot rename " + tmp + ": " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool file_exists(const std::string& path) { return std::filesystem::is_regular_file(path); }

}  // namespace g2
