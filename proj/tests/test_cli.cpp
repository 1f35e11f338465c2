#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rtomo/cli.hpp"
#include "rtomo/io.hpp"

using namespace rtomo;

namespace {

const std::filesystem::path kConfigs = RTOMO_CONFIG_DIR;

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "rtomo-test-cli";
  std::filesystem::create_directories(dir);
  return dir / name;
}

int run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  return cli::run(args, out, err);
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors") {
    CHECK(run({}) == 1);
    CHECK(run({"verify", "bogus"}) == 1);
    CHECK(run({"simulate", "--mixture", (kConfigs / "planar5.json").string(), "--n", "0", "--seed", "1", "--out",
               scratch("x").string()}) == 1);
    // --seed is mandatory for stochastic commands.
    CHECK(run({"simulate", "--mixture", (kConfigs / "planar5.json").string(), "--n", "3", "--out", scratch("x").string()}) == 1);
    CHECK(run({"estimate", "--dataset", "d", "--k", "2", "--method", "em", "--out", "o"}) == 1);
    CHECK(run({"render", "--g", "10", "--out", scratch("g").string()}) == 1);
  }

  TEST_CASE("io errors") {
    CHECK(run({"simulate", "--mixture", scratch("missing.json").string(), "--n", "3", "--seed", "1", "--out",
               scratch("x").string()}) == 2);
    CHECK(run({"bootstrap", "--estimate", scratch("missing.json").string(), "--b", "3", "--seed", "1", "--out",
               scratch("b.json").string()}) == 2);
    CHECK(run({"simulate", "--mixture", (kConfigs / "planar5.json").string(), "--n", "3", "--seed", "1", "--out",
               "/nonexistent-dir/x.txt"}) == 2);
  }

  TEST_CASE("simulate, estimate, bootstrap, render") {
    const auto data = scratch("planar.txt"), est = scratch("planar-est.json"), boot = scratch("planar-boot.json");
    REQUIRE(run({"simulate", "--mixture", (kConfigs / "planar5.json").string(), "--n", "150", "--t", "256", "--noise",
                 "0", "--seed", "1", "--truth", "--out", data.string()}) == 0);
    const std::string first = io::read_file(data);
    REQUIRE(run({"simulate", "--mixture", (kConfigs / "planar5.json").string(), "--n", "150", "--t", "256", "--noise",
                 "0", "--seed", "1", "--truth", "--out", data.string(), "--threads", "1"}) == 0);
    CHECK(io::read_file(data) == first);
    const io::DatasetFile ds = io::load_dataset(data);
    CHECK(ds.data.truth.has_value());
    CHECK(ds.manifest["parameters"]["seed"] == 1);
    CHECK(ds.manifest["inputs"]["mixture"]["sha256"].get<std::string>().size() == 64);

    REQUIRE(run({"estimate", "--dataset", data.string(), "--k", "5", "--method", "pisarenko", "--mode", "separate",
                 "--out", est.string()}) == 0);
    const io::EstimateFile e = io::load_estimate(est);
    CHECK(e.configuration.points.rows() == 2);
    CHECK(e.configuration.points.cols() == 5);
    CHECK(e.labeled.size() == 150);
    CHECK(e.estimate.weights[0] == doctest::Approx(5.0).epsilon(1e-3));

    const auto est_mle = scratch("planar-mle.json");
    REQUIRE(run({"estimate", "--dataset", data.string(), "--k", "5", "--method", "pisarenko+mle", "--mode", "shared",
                 "--out", est_mle.string()}) == 0);
    const io::EstimateFile m = io::load_estimate(est_mle);
    CHECK((m.estimate.gram - e.estimate.gram).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(m.convergence["converged"] == true);

    REQUIRE(run({"bootstrap", "--estimate", est.string(), "--b", "20", "--seed", "4", "--out", boot.string()}) == 0);
    const io::Json b = io::load_json(boot);
    CHECK(b["bootstrap"]["configurations"].size() == 20);

    const auto grid = scratch("g.txt");
    REQUIRE(run({"render", "--estimate", est.string(), "--g", "20", "--out", grid.string()}) == 0);
    CHECK(io::read_file(grid).rfind("# extent", 0) == 0);
  }

  TEST_CASE("render: grid maxima sit at the density modes") {
    const auto grid = scratch("planar-grid.txt");
    REQUIRE(run({"render", "--mixture", (kConfigs / "planar5.json").string(), "--g", "200", "--out", grid.string()}) == 0);
    std::ifstream in(grid);
    std::string line;
    std::vector<std::array<double, 3>> pts;
    while (std::getline(in, line)) {
      if (line[0] == '#') continue;
      std::istringstream ss(line);
      std::array<double, 3> p;
      ss >> p[0] >> p[1] >> p[2];
      pts.push_back(p);
    }
    REQUIRE(pts.size() == 40000);
    const double cell = 2 * std::numbers::pi / 199;
    // Local maxima over the 8-neighbourhood.
    std::vector<std::array<double, 2>> maxima;
    for (int i = 1; i < 199; ++i)
      for (int j = 1; j < 199; ++j) {
        const double v = pts[static_cast<std::size_t>(i * 200 + j)][2];
        bool top = v > 1e-6;
        for (int di = -1; di <= 1 && top; ++di)
          for (int dj = -1; dj <= 1; ++dj)
            if ((di || dj) && pts[static_cast<std::size_t>((i + di) * 200 + j + dj)][2] >= v) top = false;
        if (top) maxima.push_back({pts[static_cast<std::size_t>(i * 200 + j)][0], pts[static_cast<std::size_t>(i * 200 + j)][1]});
      }
    // Modes by gradient ascent on the analytic density from each mean.
    const RadialMixture m = io::load_mixture(kConfigs / "planar5.json");
    std::vector<Eigen::Vector2d> modes;
    for (int k = 0; k < 5; ++k) {
      Eigen::Vector2d x = m.locations().col(k);
      for (int it = 0; it < 20000; ++it) {
        Eigen::Vector2d g = Eigen::Vector2d::Zero();
        for (int j = 0; j < 5; ++j) {
          const Eigen::Vector2d dx = m.locations().col(j) - x;
          g += m.weights()[static_cast<std::size_t>(j)] * std::exp(-dx.squaredNorm() / 0.18) * dx;
        }
        x += 0.01 * g;
      }
      if (std::none_of(modes.begin(), modes.end(), [&](const auto& y) { return (y - x).norm() < 1e-4; })) modes.push_back(x);
    }
    CHECK(maxima.size() == modes.size());
    for (const auto& mode : modes) {
      double best = INFINITY;
      for (const auto& mx : maxima) best = std::min(best, std::hypot(mx[0] - mode[0], mx[1] - mode[1]));
      CHECK(best <= cell);
    }
  }

  TEST_CASE("verify subcommands write reports") {
    const auto out = scratch("thm41.json");
    CHECK(run({"verify", "thm41", "--d", "2", "--m", "20000", "--seed", "3", "--out", out.string()}) == 0);
    const io::Json j = io::load_json(out);
    CHECK(j["reports"].size() == 10);
    CHECK(j["manifest"]["parameters"]["seed"] == 3);
    CHECK(run({"verify", "gamma", "--m", "100000", "--seed", "3", "--out", scratch("gamma.json").string()}) == 0);
    CHECK(run({"verify", "fisher", "--mixture", (kConfigs / "planar5.json").string(), "--noise", "0.5", "--m", "1000",
               "--seed", "3", "--out", scratch("fisher.json").string()}) == 0);
    CHECK(io::load_json(scratch("fisher.json"))["fisher"].size() == 5);
    CHECK(run({"verify", "gram-clt", "--mixture", (kConfigs / "planar5.json").string(), "--n", "20", "--r", "50",
               "--gamma-m", "5000", "--seed", "3", "--out", scratch("clt.json").string()}) != 1);
  }
}
