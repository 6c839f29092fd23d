#pragma once

#include "volume.hpp"

#include <filesystem>
#include <json.hpp>

namespace moco5d::io {

namespace fs = std::filesystem;

/// Header of the `.vjson` / `.vbin` volume container. The blob is raw
/// little-endian, row-major over (component, x, y, z) with z fastest; complex
/// values are stored as interleaved (re, im).
struct VolumeHeader
{
  Dims dims{};
  double spacing = 1.0;
  std::string dtype = "c128"; // c64 | c128 | f64
  Index components = 1;
};

/// `stem` is the path without extension; writes stem.vjson and stem.vbin.
void write_complex_volumes(fs::path const &stem, std::span<ComplexVolume const> vols, std::string const &dtype = "c128");
std::vector<ComplexVolume> read_complex_volumes(fs::path const &stem);

void write_volume(fs::path const &stem, ComplexVolume const &v, std::string const &dtype = "c128");
ComplexVolume read_volume(fs::path const &stem);

void write_real_volumes(fs::path const &stem, Dims dims, double spacing, std::vector<std::vector<double>> const &comps);
std::vector<std::vector<double>> read_real_volumes(fs::path const &stem, VolumeHeader *header = nullptr);

VolumeHeader read_header(fs::path const &stem);

void write_doubles(fs::path const &path, std::span<double const> data);
std::vector<double> read_doubles(fs::path const &path);
void write_complex(fs::path const &path, std::span<Cx const> data);
std::vector<Cx> read_complex(fs::path const &path);

nlohmann::json read_json(fs::path const &path);
/// Writes to a temporary sibling and renames, so readers never see a partial file.
void write_json(fs::path const &path, nlohmann::json const &j);
void write_text(fs::path const &path, std::string const &text);

void require_file(fs::path const &path);

} // namespace moco5d::io
