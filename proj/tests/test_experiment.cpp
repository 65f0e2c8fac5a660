#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "saddlescape/experiment.hpp"
#include "test_support.hpp"

using namespace saddlescape;

namespace {

const std::string kFixtures = SADDLESCAPE_FIXTURE_DIR;

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.dims = {2, 1, 2, 4};
  c.seeds = {1, 2, 3, 4};
  c.opt.max_iters = 5000;
  return c;
}

}  // namespace

TEST(MatrixFixture, RoundTripsExactly) {
  std::mt19937_64 rng(1);
  Matrix m = gaussian_matrix(3, 4, rng);
  m(0, 0) = 0.1;
  m(1, 1) = -std::numeric_limits<double>::denorm_min();
  m(2, 3) = 1e300;
  std::stringstream ss;
  write_matrix(ss, m);
  EXPECT_EQ(read_matrix(ss), m);
}

TEST(MatrixFixture, ShortestDecimals) {
  std::stringstream ss;
  write_matrix(ss, Matrix{{0.1, 2}, {-3.5, 1e-7}});
  EXPECT_EQ(ss.str(), "2 2\n0.1 2\n-3.5 1e-07\n");
}

TEST(MatrixFixture, RejectsMalformedInput) {
  for (const char* text : {"", "2", "0 3\n", "2 2\n1 2 3", "1 2\n1 x\n", "1 1\nnan\n", "1 1\n1.5.2\n"}) {
    std::stringstream ss(text);
    EXPECT_THROW(read_matrix(ss), Error) << text;
  }
  std::stringstream trailing("1 1\n2\n1 1\n6\n7\n");
  EXPECT_THROW(read_dataset(trailing), Error);
}

TEST(GenerateDataset, PlantedIsRealizable) {
  const Dataset data = generate_dataset({2, 1, 2, 4}, Planted{1, 1.0}, 1);
  EXPECT_EQ(data.rank(), 1u);
  EXPECT_NEAR(global_min_value(data, 1), 0.0, 1e-20 * (1 + data.Y().squared_norm()));
}

TEST(GenerateDataset, RandomTargetHasPositiveOptimum) {
  const Dataset data = generate_dataset({2, 1, 2, 4}, RandomY{}, 1);
  EXPECT_EQ(data.rank(), 2u);
  EXPECT_GT(global_min_value(data, 1), 0.0);
  const Dataset again = generate_dataset({2, 1, 2, 4}, RandomY{}, 1);
  EXPECT_EQ(again.X(), data.X());
  EXPECT_EQ(again.Y(), data.Y());
}

TEST(GenerateDataset, BadDims) {
  for (Dims d : {Dims{0, 1, 1, 1}, Dims{3, 1, 2, 2}, Dims{1, 0, 1, 1}}) {
    try {
      generate_dataset(d, RandomY{}, 1);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::BadDims);
    }
  }
  EXPECT_THROW(generate_dataset({2, 1, 2, 4}, Planted{3, 1.0}, 1), Error);
}

TEST(GenerateDataset, FromFileReproducesInstanceA) {
  const Dataset data = generate_dataset({1, 1, 1, 1}, FromFile{kFixtures + "/instance_a.txt"}, 0);
  EXPECT_EQ(data.X(), (Matrix{{2}}));
  EXPECT_EQ(data.Y(), (Matrix{{6}}));
  const Classification c = classify(FactorPair::zeros(1, 1, 1), data, 1.0);
  EXPECT_NEAR(*c.rayleigh, -9.6, 1e-12);
  EXPECT_THROW(generate_dataset({2, 1, 1, 1}, FromFile{kFixtures + "/instance_a.txt"}, 0), Error);
  EXPECT_THROW(generate_dataset({1, 1, 1, 1}, FromFile{kFixtures + "/missing.txt"}, 0), Error);
}

TEST(Run, ClassifyInstanceB) {
  ExperimentConfig c;
  c.dims = {2, 1, 2, 2};
  c.data_mode = FromFile{kFixtures + "/instance_b.txt"};
  c.suites = {Suite::Classify};
  c.rotations = 0;
  const Report r = run(c);
  ASSERT_EQ(r.suites.size(), 1u);
  const SuiteReport& s = r.suites[0];
  EXPECT_TRUE(s.passed);
  EXPECT_EQ(s.counts.at("global_min"), 2u);
  EXPECT_EQ(s.counts.at("strict_saddle"), 3u);
  for (const auto& p : s.points) {
    if (p.spec == "[(2,+)]") {
      EXPECT_NEAR(*p.rayleigh, -2.0, 1e-12);
      EXPECT_NEAR(*p.bound, -4.0 / 3.0, 1e-12);
    }
  }
  EXPECT_EQ(exit_code(r), 0);
  EXPECT_NEAR(r.dataset.global_min_value, 0.5, 1e-14);
}

TEST(Run, AllSuitesPassOnSmallRandomInstance) {
  const Report r = run(small_config());
  for (const auto& s : r.suites) EXPECT_TRUE(s.passed) << s.name << ": " << s.message;
  EXPECT_TRUE(r.passed);
}

TEST(Run, SuiteFailureSetsExitCode) {
  ExperimentConfig c = small_config();
  c.suites = {Suite::Optimize};
  c.opt.max_iters = 1;
  const Report r = run(c);
  EXPECT_FALSE(r.passed);
  EXPECT_EQ(exit_code(r), 1);
  EXPECT_FALSE(r.suites[0].message.empty());
}

TEST(Run, ConfigErrorsThrow) {
  ExperimentConfig c = small_config();
  c.seeds.clear();
  EXPECT_THROW(run(c), Error);
  c = small_config();
  c.mu = -1;
  EXPECT_THROW(run(c), Error);
  c = small_config();
  c.auto_step = false;
  c.opt.step_size = 0;
  EXPECT_THROW(run(c), Error);
  EXPECT_THROW(parse_suite("bogus"), Error);
}

TEST(Report, RoundTrip) {
  const Report r = run(small_config());
  const std::string text = emit_report(r);
  const Report back = parse_report(text);
  EXPECT_EQ(back, r);
  EXPECT_EQ(emit_report(back), text);
  EXPECT_THROW(parse_report("{\"schema_version\": 1}"), Error);
  EXPECT_THROW(parse_report("not json"), Error);
}

TEST(Report, OptionalFieldsSerializeAsNull) {
  PointRecord p{"[-]", 1.0, 0.0, 0.0, "GlobalMin", std::nullopt, std::nullopt};
  const nlohmann::json j = p;
  EXPECT_TRUE(j.at("rayleigh").is_null());
  EXPECT_EQ(j.get<PointRecord>(), p);
}

TEST(Report, DeterministicAcrossRunsAndThreadCounts) {
  ExperimentConfig c = small_config();
  const std::string a = emit_report(run(c));
  const std::string b = emit_report(run(c));
  c.jobs = 4;
  const std::string threaded = emit_report(run(c));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, threaded);
}
