#include "moco5d/dataset.hpp"

#include "moco5d/io.hpp"

#include <fmt/format.h>
#include <fstream>
#include <sstream>

namespace moco5d {

namespace fs = std::filesystem;

std::vector<std::pair<double, double>> canonical_truth_states()
{
  std::vector<std::pair<double, double>> s;
  for (int c = 0; c < 4; c++) {
    for (int r = 0; r < 4; r++) { s.emplace_back((c + 0.5) / 4.0, (r + 0.5) / 4.0); }
  }
  return s;
}

void write_dataset(fs::path const &dir, KTDataset const &ds)
{
  Index const nt = ds.frame_count();
  if (nt < 1) { throw DomainError("dataset has no frames"); }
  Index const nc = ds.frames[0].ncoils;
  Index const ns = ds.frames[0].nsamples;
  require_shape(ns == ds.traj.samples_per_frame() && ds.traj.frame_count() == nt, "dataset: trajectory / k-space mismatch");
  require_shape(ds.nav.cols == nt, "dataset: navigator columns differ from frame count");
  fs::create_directories(dir);

  nlohmann::json meta = {{"format", "moco5d-ktdataset"},
                         {"version", 1},
                         {"grid", {{"dims", {ds.grid.dims.nx, ds.grid.dims.ny, ds.grid.dims.nz}}, {"spacing_mm", ds.grid.spacing_mm}}},
                         {"phantom", ds.phantom},
                         {"frame_seconds", ds.frame_seconds},
                         {"seed", ds.seed},
                         {"frames", nt},
                         {"ncoils", nc},
                         {"spokes_per_frame", ds.traj.spokes_per_frame},
                         {"samples_per_spoke", ds.traj.samples_per_spoke},
                         {"navigator_rows", ds.nav.rows},
                         {"navigator_spacing_mm", ds.nav.sample_spacing_mm},
                         {"has_truth", ds.truth.has_value()}};

  std::vector<double> k;
  k.reserve(ds.traj.points.size() * 3);
  for (auto const &p : ds.traj.points) { k.insert(k.end(), p.begin(), p.end()); }
  io::write_doubles(dir / "traj.bin", k);

  std::vector<Cx> samples;
  samples.reserve(static_cast<size_t>(nt * nc * ns));
  for (auto const &f : ds.frames) {
    require_shape(f.ncoils == nc && f.nsamples == ns, "dataset: inconsistent frame shapes");
    samples.insert(samples.end(), f.samples.begin(), f.samples.end());
  }
  io::write_complex(dir / "kspace.bin", samples);
  io::write_doubles(dir / "navigators.bin", ds.nav.y);
  io::write_complex_volumes(dir / "coilmaps", ds.maps.maps);

  if (ds.truth) {
    fs::create_directories(dir / "truth");
    std::string csv = "frame,time_s,cardiac_phase,resp_phase\n";
    for (Index t = 0; t < nt; t++) {
      csv += fmt::format("{},{:.17g},{:.17g},{:.17g}\n", t, ds.frames[t].time_seconds, ds.truth->cardiac[t], ds.truth->resp[t]);
    }
    io::write_text(dir / "truth" / "phases.csv", csv);
    io::write_volume(dir / "truth" / "reference", phantom_volume(ds.phantom, ds.grid, 0.0, 0.0).volume);
    std::vector<ComplexVolume> states;
    std::vector<std::vector<double>> fields;
    for (auto const &[c, r] : canonical_truth_states()) {
      auto st = phantom_volume(ds.phantom, ds.grid, c, r);
      states.push_back(std::move(st.volume));
      for (int a = 0; a < 3; a++) { fields.push_back(std::move(st.truth.u[a])); }
    }
    io::write_complex_volumes(dir / "truth" / "states", states);
    io::write_real_volumes(dir / "truth" / "fields", ds.grid.dims, ds.grid.spacing_mm, fields);
  }
  io::write_json(dir / "meta.json", meta);
}

KTDataset read_dataset(fs::path const &dir)
{
  auto const meta = io::read_json(dir / "meta.json");
  if (meta.value("format", "") != "moco5d-ktdataset") { throw Error(fmt::format("{}: not a dataset directory", dir.string())); }
  if (meta.at("version").get<int>() != 1) { throw Error(fmt::format("{}: unsupported dataset version", dir.string())); }
  KTDataset ds;
  auto const dims = meta.at("grid").at("dims").get<std::array<Index, 3>>();
  ds.grid = GridSpec{Dims{dims[0], dims[1], dims[2]}, meta.at("grid").at("spacing_mm").get<double>()};
  ds.phantom = meta.at("phantom").get<PhantomSpec>();
  ds.frame_seconds = meta.at("frame_seconds").get<double>();
  ds.seed = meta.at("seed").get<std::uint64_t>();
  Index const nt = meta.at("frames").get<Index>();
  Index const nc = meta.at("ncoils").get<Index>();
  ds.traj.spokes_per_frame = meta.at("spokes_per_frame").get<Index>();
  ds.traj.samples_per_spoke = meta.at("samples_per_spoke").get<Index>();
  Index const ns = ds.traj.samples_per_frame();

  auto const k = io::read_doubles(dir / "traj.bin");
  require_shape(static_cast<Index>(k.size()) == nt * ns * 3, fmt::format("{}: trajectory length mismatch", (dir / "traj.bin").string()));
  ds.traj.points.resize(static_cast<size_t>(nt * ns));
  for (size_t i = 0; i < ds.traj.points.size(); i++) { ds.traj.points[i] = {k[3 * i], k[3 * i + 1], k[3 * i + 2]}; }

  auto const samples = io::read_complex(dir / "kspace.bin");
  require_shape(static_cast<Index>(samples.size()) == nt * nc * ns, fmt::format("{}: k-space length mismatch", (dir / "kspace.bin").string()));
  ds.frames.reserve(nt);
  for (Index t = 0; t < nt; t++) {
    KSpaceFrame f(nc, ns);
    std::copy_n(samples.begin() + t * nc * ns, nc * ns, f.samples.begin());
    f.frame_index = t;
    f.time_seconds = static_cast<double>(t) * ds.frame_seconds;
    ds.frames.push_back(std::move(f));
  }

  ds.nav = NavigatorMatrix(meta.at("navigator_rows").get<Index>(), nt);
  ds.nav.sample_spacing_mm = meta.at("navigator_spacing_mm").get<double>();
  ds.nav.y = io::read_doubles(dir / "navigators.bin");
  require_shape(static_cast<Index>(ds.nav.y.size()) == ds.nav.rows * nt, "navigator matrix size mismatch");
  for (Index t = 0; t < nt; t++) { ds.nav.frame_times.push_back(static_cast<double>(t) * ds.frame_seconds); }

  ds.maps.maps = io::read_complex_volumes(dir / "coilmaps");
  require_shape(ds.maps.ncoils() == nc, "coil map count differs from meta.json");

  if (meta.at("has_truth").get<bool>()) {
    auto const path = dir / "truth" / "phases.csv";
    io::require_file(path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    TruthPhases truth;
    while (std::getline(in, line)) {
      if (line.empty()) { continue; }
      std::stringstream ss(line);
      std::string cell;
      std::vector<std::string> cells;
      while (std::getline(ss, cell, ',')) { cells.push_back(cell); }
      if (cells.size() != 4) { throw Error(fmt::format("{}: malformed row '{}'", path.string(), line)); }
      truth.cardiac.push_back(std::stod(cells[2]));
      truth.resp.push_back(std::stod(cells[3]));
    }
    require_shape(static_cast<Index>(truth.cardiac.size()) == nt, fmt::format("{}: row count differs from frames", path.string()));
    ds.truth = std::move(truth);
  }
  return ds;
}

} // namespace moco5d
