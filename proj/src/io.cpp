#include "moco5d/io.hpp"

#include <bit>
#include <cstring>
#include <fmt/format.h>
#include <fstream>

namespace moco5d::io {

static_assert(std::endian::native == std::endian::little, "container format assumes a little-endian host");

namespace {

fs::path with_ext(fs::path stem, char const *ext)
{
  stem += ext;
  return stem;
}

void write_bytes(fs::path const &path, void const *p, size_t n)
{
  if (path.has_parent_path()) { fs::create_directories(path.parent_path()); }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) { throw Error(fmt::format("cannot open {} for writing", tmp.string())); }
    f.write(static_cast<char const *>(p), static_cast<std::streamsize>(n));
    if (!f) { throw Error(fmt::format("write failed: {}", tmp.string())); }
  }
  fs::rename(tmp, path);
}

std::vector<char> read_bytes(fs::path const &path)
{
  require_file(path);
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  auto const n = static_cast<size_t>(f.tellg());
  f.seekg(0);
  std::vector<char> buf(n);
  f.read(buf.data(), static_cast<std::streamsize>(n));
  if (!f) { throw Error(fmt::format("read failed: {}", path.string())); }
  return buf;
}

void write_header(fs::path const &stem, VolumeHeader const &h)
{
  nlohmann::json j;
  j["dims"] = {h.dims.nx, h.dims.ny, h.dims.nz};
  j["spacing"] = h.spacing;
  j["dtype"] = h.dtype;
  j["order"] = "row-major";
  j["components"] = h.components;
  write_json(with_ext(stem, ".vjson"), j);
}

size_t scalar_bytes(std::string const &dtype)
{
  if (dtype == "c128") { return 16; }
  if (dtype == "c64") { return 8; }
  if (dtype == "f64") { return 8; }
  throw Error(fmt::format("unsupported dtype '{}'", dtype));
}

} // namespace

void require_file(fs::path const &path)
{
  if (!fs::exists(path)) { throw Error(fmt::format("missing file: {}", path.string())); }
}

VolumeHeader read_header(fs::path const &stem)
{
  auto const j = read_json(with_ext(stem, ".vjson"));
  VolumeHeader h;
  try {
    auto const d = j.at("dims");
    if (d.size() != 3) { throw Error("dims must have 3 entries"); }
    h.dims = Dims{d[0].get<Index>(), d[1].get<Index>(), d[2].get<Index>()};
    h.spacing = j.at("spacing").get<double>();
    h.dtype = j.at("dtype").get<std::string>();
    if (j.at("order").get<std::string>() != "row-major") { throw Error("only row-major order is supported"); }
    h.components = j.value("components", Index{1});
  } catch (nlohmann::json::exception const &e) {
    throw Error(fmt::format("malformed volume header {}: {}", stem.string(), e.what()));
  }
  scalar_bytes(h.dtype);
  return h;
}

void write_complex_volumes(fs::path const &stem, std::span<ComplexVolume const> vols, std::string const &dtype)
{
  if (vols.empty()) { throw ShapeError("no volumes to write"); }
  for (auto const &v : vols) { require_shape(v.dims() == vols[0].dims(), "volume set with mixed dims"); }
  VolumeHeader h{vols[0].dims(), vols[0].spacing(), dtype, static_cast<Index>(vols.size())};
  if (dtype == "c128") {
    std::vector<Cx> buf;
    buf.reserve(vols.size() * vols[0].size());
    for (auto const &v : vols) { buf.insert(buf.end(), v.vector().begin(), v.vector().end()); }
    write_bytes(with_ext(stem, ".vbin"), buf.data(), buf.size() * sizeof(Cx));
  } else if (dtype == "c64") {
    std::vector<float> buf;
    buf.reserve(2 * vols.size() * vols[0].size());
    for (auto const &v : vols) {
      for (auto const &c : v.vector()) {
        buf.push_back(static_cast<float>(c.real()));
        buf.push_back(static_cast<float>(c.imag()));
      }
    }
    write_bytes(with_ext(stem, ".vbin"), buf.data(), buf.size() * sizeof(float));
  } else {
    throw Error(fmt::format("dtype '{}' is not complex", dtype));
  }
  write_header(stem, h);
}

std::vector<ComplexVolume> read_complex_volumes(fs::path const &stem)
{
  auto const h = read_header(stem);
  auto const bytes = read_bytes(with_ext(stem, ".vbin"));
  Index const n = h.dims.size();
  if (bytes.size() != static_cast<size_t>(n * h.components) * scalar_bytes(h.dtype)) {
    throw ShapeError(fmt::format("{}.vbin has {} bytes, header implies {}", stem.string(), bytes.size(),
                                 n * h.components * scalar_bytes(h.dtype)));
  }
  std::vector<ComplexVolume> out;
  for (Index c = 0; c < h.components; c++) {
    std::vector<Cx> data(n);
    if (h.dtype == "c128") {
      std::memcpy(data.data(), bytes.data() + c * n * 16, n * 16);
    } else if (h.dtype == "c64") {
      std::vector<float> f(2 * n);
      std::memcpy(f.data(), bytes.data() + c * n * 8, n * 8);
      for (Index i = 0; i < n; i++) { data[i] = Cx(f[2 * i], f[2 * i + 1]); }
    } else {
      for (Index i = 0; i < n; i++) {
        double v;
        std::memcpy(&v, bytes.data() + (c * n + i) * 8, 8);
        data[i] = v;
      }
    }
    out.emplace_back(h.dims, h.spacing, std::move(data));
  }
  return out;
}

void write_volume(fs::path const &stem, ComplexVolume const &v, std::string const &dtype)
{
  write_complex_volumes(stem, std::span<ComplexVolume const>(&v, 1), dtype);
}

ComplexVolume read_volume(fs::path const &stem)
{
  auto v = read_complex_volumes(stem);
  if (v.size() != 1) { throw ShapeError(fmt::format("{} holds {} volumes, expected 1", stem.string(), v.size())); }
  return std::move(v[0]);
}

void write_real_volumes(fs::path const &stem, Dims dims, double spacing, std::vector<std::vector<double>> const &comps)
{
  std::vector<double> buf;
  for (auto const &c : comps) {
    require_shape(static_cast<Index>(c.size()) == dims.size(), "real volume component size mismatch");
    buf.insert(buf.end(), c.begin(), c.end());
  }
  write_bytes(with_ext(stem, ".vbin"), buf.data(), buf.size() * sizeof(double));
  write_header(stem, VolumeHeader{dims, spacing, "f64", static_cast<Index>(comps.size())});
}

std::vector<std::vector<double>> read_real_volumes(fs::path const &stem, VolumeHeader *header)
{
  auto const h = read_header(stem);
  if (h.dtype != "f64") { throw Error(fmt::format("{} is not a real volume", stem.string())); }
  auto const flat = read_doubles(with_ext(stem, ".vbin"));
  Index const n = h.dims.size();
  require_shape(static_cast<Index>(flat.size()) == n * h.components, "real volume blob size mismatch");
  std::vector<std::vector<double>> out(h.components);
  for (Index c = 0; c < h.components; c++) { out[c].assign(flat.begin() + c * n, flat.begin() + (c + 1) * n); }
  if (header) { *header = h; }
  return out;
}

void write_doubles(fs::path const &path, std::span<double const> data)
{
  write_bytes(path, data.data(), data.size_bytes());
}

std::vector<double> read_doubles(fs::path const &path)
{
  auto const b = read_bytes(path);
  if (b.size() % sizeof(double)) { throw ShapeError(fmt::format("{} is not a whole number of doubles", path.string())); }
  std::vector<double> out(b.size() / sizeof(double));
  std::memcpy(out.data(), b.data(), b.size());
  return out;
}

void write_complex(fs::path const &path, std::span<Cx const> data) { write_bytes(path, data.data(), data.size_bytes()); }

std::vector<Cx> read_complex(fs::path const &path)
{
  auto const b = read_bytes(path);
  if (b.size() % sizeof(Cx)) { throw ShapeError(fmt::format("{} is not a whole number of complex values", path.string())); }
  std::vector<Cx> out(b.size() / sizeof(Cx));
  std::memcpy(out.data(), b.data(), b.size());
  return out;
}

nlohmann::json read_json(fs::path const &path)
{
  require_file(path);
  std::ifstream f(path);
  try {
    return nlohmann::json::parse(f);
  } catch (nlohmann::json::exception const &e) {
    throw Error(fmt::format("cannot parse {}: {}", path.string(), e.what()));
  }
}

void write_json(fs::path const &path, nlohmann::json const &j)
{
  write_text(path, j.dump(2) + "\n");
}

void write_text(fs::path const &path, std::string const &text) { write_bytes(path, text.data(), text.size()); }

} // namespace moco5d::io
