#include <doctest.h>

#include <filesystem>

#include "rtomo/error.hpp"
#include "rtomo/io.hpp"

using namespace rtomo;

namespace {

RadialMixture spatial_example() {
  Eigen::MatrixXd mu(3, 4);
  mu << 0.0, 0.7, -0.7, 0.0, 0.8, -0.4, -0.4, 0.0, -0.3, -0.3, -0.3, 0.8;
  return RadialMixture(3, 0.46, {2, 3, 2.4, 4}, mu);
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "rtomo-test-io";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("sha256 of known strings") {
    CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("mixture round trip and validation") {
    const RadialMixture m = spatial_example();
    const RadialMixture back = io::mixture_from_json(io::mixture_to_json(m));
    CHECK(back.locations() == m.locations());
    CHECK(back.weights() == m.weights());
    CHECK(back.sigma() == m.sigma());
    io::Json bad = io::mixture_to_json(m);
    bad["weights"].push_back(7.0);
    CHECK_THROWS_AS(io::mixture_from_json(bad), InvalidArgument);
    bad = io::mixture_to_json(m);
    bad.erase("sigma");
    CHECK_THROWS_AS(io::mixture_from_json(bad), IoError);
    const io::Json zero = {{"d", 2}, {"sigma", 0.3}, {"weights", io::Json::array()}, {"locations", io::Json::array()}};
    CHECK(io::mixture_from_json(zero).size() == 0);
  }

  TEST_CASE("dataset write, read, write is byte-identical") {
    for (bool binary : {false, true}) {
      for (bool truth : {false, true}) {
        SimulationOptions o;
        o.count = 5;
        o.resolution = 16;
        o.seed = 3;
        o.noise_sd = 0.01;
        o.keep_truth = truth;
        io::DatasetFile f;
        f.data = simulate(spatial_example(), o);
        f.binary = binary;
        f.manifest = io::manifest("simulate", {{"n", 5}});
        const std::string first = io::format_dataset(f);
        const io::DatasetFile g = io::parse_dataset(first);
        CHECK(io::format_dataset(g) == first);
        for (std::size_t n = 0; n < 5; ++n) CHECK(g.data.profiles[n].values == f.data.profiles[n].values);
        CHECK(g.data.truth.has_value() == truth);
        if (truth) {
          CHECK(g.data.truth->rotations[2].matrix() == f.data.truth->rotations[2].matrix());
          CHECK(g.data.truth->locations == f.data.truth->locations);
        }
        const auto path = scratch(binary ? "d.bin" : "d.txt");
        io::save_dataset(path, g);
        CHECK(io::read_file(path) == first);
      }
    }
  }

  TEST_CASE("malformed datasets") {
    CHECK_THROWS_AS(io::parse_dataset("nope\n{}\n"), IoError);
    CHECK_THROWS_AS(io::parse_dataset("rtomo-dataset 1\n{bad json\n"), IoError);
    SimulationOptions o;
    o.count = 2;
    o.resolution = 8;
    io::DatasetFile f;
    f.data = simulate(RadialMixture(2, 0.3, {1.0}, Eigen::MatrixXd::Zero(2, 1)), o);
    std::string text = io::format_dataset(f);
    CHECK_THROWS_AS(io::parse_dataset(text.substr(0, text.size() - 5)), IoError);
    CHECK_THROWS_AS(io::parse_dataset(text + "1 2 3\n"), IoError);
    CHECK_THROWS_AS(io::load_dataset(scratch("missing.txt")), IoError);
  }

  TEST_CASE("estimate round trip") {
    io::EstimateFile e;
    e.d = 2;
    e.sigma = 0.3;
    e.method = "pisarenko";
    e.mode = "separate";
    e.estimate.gram = Eigen::MatrixXd::Identity(2, 2);
    e.estimate.weights = {2.0, 1.0};
    e.estimate.profiles_used = 1;
    e.configuration.points = Eigen::MatrixXd::Constant(2, 2, 0.5);
    e.configuration.effective_rank = 2;
    ProfileDeconvolution r;
    r.index = 0;
    r.locations = Eigen::MatrixXd::Constant(1, 2, 0.25);
    r.amplitudes = {2.0, 1.0};
    r.flags = kFlagClipped;
    e.labeled.push_back(r);
    const auto path = scratch("e.json");
    io::save_estimate(path, e);
    const io::EstimateFile back = io::load_estimate(path);
    CHECK(back.estimate.gram == e.estimate.gram);
    CHECK(back.labeled[0].flags == kFlagClipped);
    CHECK(back.labeled[0].locations == r.locations);
    CHECK(io::estimate_to_json(back).dump() == io::estimate_to_json(e).dump());
  }

  TEST_CASE("density grid") {
    const RadialMixture zero(2, 0.3, {}, Eigen::MatrixXd(2, 0));
    const std::string g = io::format_density_grid(zero, 4);
    CHECK(g.rfind("# extent", 0) == 0);
    std::istringstream in(g);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
      if (line[0] == '#') continue;
      ++rows;
      CHECK(line.substr(line.rfind(' ') + 1) == "0");
    }
    CHECK(rows == 16);
    const std::string g3 = io::format_density_grid(spatial_example(), 5);
    CHECK(std::count(g3.begin(), g3.end(), '\n') == 125 + 3);
    CHECK_THROWS_AS(io::format_density_grid(zero, 1), InvalidArgument);
  }
}
