#include <doctest.h>

#include <fstream>
#include <sstream>

#include "idvo/run_config.hpp"
#include "test_util.hpp"

using namespace idvo;

TEST_CASE("run config defaults") {
  const RunConfig cfg;
  CHECK(cfg.optimizer.inertia.chi == 100.0);
  CHECK(cfg.optimizer.weights.inertia == 1.0);
  CHECK(cfg.optimizer.weights.rec == 1.0);
  CHECK(cfg.optimizer.weights.ssim == 0.2);
  CHECK(cfg.optimizer.weights.align == 0.1);
  CHECK(cfg.optimizer.weights.mask == 0.15);
  CHECK(cfg.optimizer.weights.scales == std::vector<int>{1, 2, 4, 8});
  CHECK(cfg.optimizer.inertia.a_typ == 2.0);
  CHECK(cfg.optimizer.inertia.j_typ == 0.5);
  CHECK(cfg.optimizer.adam.lr == 0.0002);
  CHECK(cfg.optimizer.adam.beta1 == 0.9);
  CHECK(cfg.optimizer.adam.beta2 == 0.999);
  REQUIRE(cfg.resize.has_value());
  CHECK(cfg.resize->width == 416);
  CHECK(cfg.resize->height == 128);
  CHECK(cfg.stride() == 3);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("serialize round trip covers every key") {
  RunConfig cfg;
  apply_config_text(cfg,
                    "# comment\n"
                    "lr = 0.01   # trailing comment\n"
                    "\n"
                    "scales=1,2\n"
                    "resize=none\n"
                    "source_direction=previous\n"
                    "ate_alignment=similarity\n"
                    "dhem_enabled=false\n"
                    "synth_frames=12\n"
                    "seed=18446744073709551615\n",
                    "test.cfg");
  CHECK(cfg.optimizer.adam.lr == 0.01);
  CHECK(cfg.optimizer.weights.scales == std::vector<int>{1, 2});
  CHECK_FALSE(cfg.resize.has_value());
  CHECK(cfg.optimizer.direction == SourceDirection::previous);
  CHECK(cfg.ate_alignment == AteAlignment::similarity);
  CHECK_FALSE(cfg.optimizer.dhem.enabled);
  CHECK(cfg.synth.frames == 12);
  CHECK(cfg.optimizer.seed == 18446744073709551615ull);

  RunConfig back;
  apply_config_text(back, serialize(cfg), "echo");
  CHECK(serialize(back) == serialize(cfg));

  const std::string text = serialize(RunConfig{});
  for (const std::string& key : config_keys()) {
    const bool listed = text.find("\n" + key + "=") != std::string::npos || text.rfind(key + "=", 0) == 0;
    CHECK_MESSAGE(listed, key);
  }
}

TEST_CASE("run config rejects bad input") {
  RunConfig cfg;
  CHECK_THROWS_AS(apply_setting(cfg, "learning_rate", "0.1"), ConfigError);
  CHECK_THROWS_AS(apply_setting(cfg, "lr", "fast"), ConfigError);
  CHECK_THROWS_AS(apply_setting(cfg, "iters", "3.5"), ConfigError);
  CHECK_THROWS_AS(apply_setting(cfg, "fix_gauge", "yes"), ConfigError);
  CHECK_THROWS_AS(apply_setting(cfg, "resize", "big"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(cfg, "lr 0.1\n", "x.cfg"), ConfigError);
  try {
    apply_config_text(cfg, "lr=0.1\nbogus=1\n", "x.cfg");
    FAIL("unknown key accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("x.cfg:2") != std::string::npos);
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
  CHECK_THROWS_AS(apply_config_file(cfg, "/nonexistent/run.cfg"), LoadError);

  RunConfig stride;
  stride.snippet_stride = 5;
  CHECK_THROWS_AS(stride.validate(), ConfigError);
  RunConfig lr;
  lr.optimizer.adam.lr = -1.0;
  CHECK_THROWS_AS(lr.validate(), ConfigError);
}

TEST_CASE("precedence: file, then environment, then ablation") {
  const std::string dir = test::scratch_dir("run_config");
  {
    std::ofstream f(dir + "/run.cfg");
    f << "lr=0.01\nw_inertia=0.5\niters=7\n";
  }
  RunConfig cfg;
  apply_config_file(cfg, dir + "/run.cfg");
  apply_environment(cfg, {{"IDVO_ITERS", "9"}, {"PATH", "/bin"}});
  CHECK(cfg.optimizer.adam.lr == 0.01);
  CHECK(cfg.optimizer.iters == 9);
  CHECK(cfg.optimizer.weights.inertia == 0.5);
  apply_ablation(cfg, "no-inertia");
  CHECK(cfg.optimizer.weights.inertia == 0.0);
  apply_ablation(cfg, "no-dhem");
  CHECK_FALSE(cfg.optimizer.dhem.enabled);
  CHECK_THROWS_AS(apply_ablation(cfg, "no-rcnn"), ConfigError);
  CHECK_THROWS_AS(apply_environment(cfg, {{"IDVO_NOPE", "1"}}), ConfigError);

  write_config_echo(dir + "/out", cfg);
  std::ifstream echo(dir + "/out/config.txt");
  std::stringstream s;
  s << echo.rdbuf();
  CHECK(s.str().find("w_inertia=0\n") != std::string::npos);
  CHECK(s.str().find("dhem_enabled=false\n") != std::string::npos);
}
