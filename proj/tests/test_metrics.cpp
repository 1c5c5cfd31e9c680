#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fairgame/io.hpp"
#include "fairgame/metrics.hpp"

using namespace fairgame;

namespace {

double g(std::vector<double> c) { return gini(c).value; }

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fairgame_metrics_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Three episodes of a two-agent run with hand-picked values.
std::string synthetic_log() {
  return std::string(kLogHeader) +
         "\n"
         "100,0,0,10,4,0.1,0,0,0,0\n100,0,1,8,6,0.1,0,0,0,0\n"
         "200,1,0,12,2,0.3,0,0,0,0\n200,1,1,9,8,0.3,0,0,0,0\n"
         "300,2,0,11,5,0,0,0,0,0\n300,2,1,11,5,0,0,0,0,0\n";
}

}  // namespace

TEST(Gini, Examples) {
  EXPECT_EQ(g({1, 1, 1, 1}), 0.0);
  EXPECT_NEAR(g({1, 0, 0, 0, 0, 0, 0}), 6.0 / 7.0, 1e-15);
  EXPECT_NEAR(g({1, 2, 3}), 8.0 / 36.0, 1e-15);
  EXPECT_NEAR(g({1, 2, 3}), 0.2222, 1e-4);
}

TEST(Gini, ZeroTotalFlagged) {
  const std::vector<double> zeros(3, 0.0);
  const auto r = gini(zeros);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_TRUE(r.zero_total);
  EXPECT_FALSE(gini(std::vector<double>{1.0, 0.0}).zero_total);
}

TEST(Gini, Errors) {
  EXPECT_THROW(g({}), DomainError);
  EXPECT_THROW(g({1.0, -0.5}), DomainError);
}

TEST(Gini, InvarianceBoundsAndTransfers) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 10.0);
  for (int k = 0; k < 500; ++k) {
    const std::size_t n = 1 + rng() % 8;
    std::vector<double> c(n);
    for (auto& x : c) x = unit(rng);
    const double base = g(c);
    const double bound = (static_cast<double>(n) - 1.0) / static_cast<double>(n);
    EXPECT_GE(base, 0.0);
    EXPECT_LE(base, bound + 1e-15);

    auto scaled = c;
    for (auto& x : scaled) x *= 3.7;
    EXPECT_NEAR(g(scaled), base, 1e-12);

    auto shuffled = c;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_NEAR(g(shuffled), base, 1e-12);

    if (n >= 2) {
      // Move delta from the richest to the poorest without reversing their order.
      auto t = c;
      const auto rich = std::max_element(t.begin(), t.end()) - t.begin();
      const auto poor = std::min_element(t.begin(), t.end()) - t.begin();
      const double delta = 0.5 * (t[rich] - t[poor]) * std::uniform_real_distribution<double>(0, 1)(rng);
      t[rich] -= delta;
      t[poor] += delta;
      EXPECT_LE(g(t), base + 1e-12);
    }

    std::vector<double> one_hot(n, 0.0);
    one_hot[rng() % n] = 2.5;
    EXPECT_NEAR(g(one_hot), bound, 1e-15);
  }
}

TEST(RollingAggregate, Examples) {
  const std::vector<double> s{1, 2, 3};
  const auto w2 = rolling_aggregate(s, 2);
  EXPECT_EQ(w2.mean, (std::vector<double>{1, 1.5, 2.5}));
  EXPECT_EQ(w2.min, (std::vector<double>{1, 1, 2}));
  EXPECT_EQ(w2.max, (std::vector<double>{1, 2, 3}));
  const auto w1 = rolling_aggregate(s, 1);
  EXPECT_EQ(w1.mean, s);
  EXPECT_EQ(w1.min, s);
  EXPECT_EQ(w1.max, s);
  const std::vector<double> flat(6, 4.25);
  const auto c = rolling_aggregate(flat, 3);
  EXPECT_EQ(c.mean, flat);
  EXPECT_EQ(c.min, flat);
  EXPECT_EQ(c.max, flat);
}

TEST(RollingAggregate, Errors) {
  const std::vector<double> s{1.0};
  EXPECT_THROW(rolling_aggregate(s, 0), DomainError);
  EXPECT_THROW(rolling_aggregate(std::vector<double>{}, 3), DomainError);
}

TEST(LogCsv, RoundTrip) {
  std::vector<LogRecord> rows(2);
  rows[0] = {10, 0, 0, 1.25, 3, 0.1, -0.5, 2.0, 0.69, 0};
  rows[1] = {10, 0, 1, 0.1 + 0.2, 4, 0.1, 1e-300, 0, 0.5, 3};
  std::ostringstream os;
  write_log_csv<LogRecord>(os, rows);
  std::istringstream is(os.str());
  const auto back = read_log_csv(is);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].episode_return, 0.1 + 0.2);
  EXPECT_EQ(back[1].actor_loss, 1e-300);
  EXPECT_EQ(back[1].floor_hits, 3u);
}

TEST(LogCsv, MissingColumnIsSchemaError) {
  std::istringstream is("step,episode,agent,return\n1,0,0,1\n");
  EXPECT_THROW(read_log_csv(is), SchemaError);
}

TEST(EmitPlotData, EmptyLogGivesEmptyPanels) {
  const auto dir = scratch("empty");
  std::ofstream(dir / "log.csv") << kLogHeader << '\n';
  const auto files = emit_plot_data(dir / "log.csv", dir / "panels");
  EXPECT_EQ(files.size(), 6u);
  std::ifstream is(dir / "panels" / "panel_total.csv");
  std::string header, extra;
  std::getline(is, header);
  EXPECT_EQ(header, "step,mean,min,max");
  EXPECT_FALSE(std::getline(is, extra));
}

TEST(EmitPlotData, SingleRunBandCollapses) {
  const auto dir = scratch("single");
  std::ofstream(dir / "log.csv") << std::string(kLogHeader) << "\n100,0,0,1,7,0,0,0,0,0\n";
  emit_plot_data(dir / "log.csv", dir / "panels");
  std::ifstream is(dir / "panels" / "panel_total.csv");
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_EQ(row, "100,7,7,7");
  std::ifstream agents(dir / "panels" / "panel_per_agent.csv");
  std::getline(agents, header);
  EXPECT_EQ(header, "step,mean,min,max,agent");
}

TEST(EmitPlotData, SyntheticPanels) {
  std::istringstream is(synthetic_log());
  const auto rows = read_log_csv(is);
  const auto panels = build_panels(rows, 2);
  ASSERT_EQ(panels.size(), 3u);
  EXPECT_EQ(panels[0].steps, (std::vector<std::size_t>{100, 200, 300}));
  EXPECT_EQ(panels[0].series[0].mean, (std::vector<double>{10, 10, 10}));
  EXPECT_EQ(panels[1].series.size(), 2u);
  EXPECT_EQ(panels[1].series[0].max, (std::vector<double>{4, 4, 5}));
  EXPECT_EQ(panels[2].series[0].mean, (std::vector<double>{0.1, 0.2, 0.15}));
}

TEST(EmitPlotData, GoldenSvg) {
  const auto dir = scratch("golden");
  std::ofstream(dir / "log.csv") << synthetic_log();
  emit_plot_data(dir / "log.csv", dir / "panels", 2);
  for (const std::string name : {"panel_total", "panel_per_agent", "panel_gini"}) {
    const auto produced = read_text_file((dir / "panels" / (name + ".svg")).string());
    const std::string golden = "data/golden_" + name + ".svg";
    if (std::getenv("FAIRGAME_REGENERATE_GOLDEN") != nullptr) std::ofstream(golden, std::ios::binary) << produced;
    EXPECT_EQ(produced, read_text_file(golden)) << name;
  }
}

TEST(EmitPlotData, MissingLogIsSchemaError) {
  EXPECT_THROW(emit_plot_data("/nonexistent/log.csv", scratch("missing")), SchemaError);
}
