#include <doctest.h>

#include <fstream>
#include <numeric>

#include "cotbert/error.hpp"
#include "cotbert/report.hpp"
#include "support.hpp"

using namespace cotbert;

namespace {

EvalReport sample_report() {
  EvalReport r;
  TaskResult a;
  a.name = "STS12";
  a.pairs = 3;
  a.spearman = 61.234;
  a.gold = {1, 2, 3};
  a.predicted = {0.1, 0.2, 0.3};
  a.alignment = 0.25;
  a.uniformity = -2.5;
  TaskResult b;
  b.name = "SICK/R";
  b.failed = true;
  b.error = "cannot open x";
  r.tasks = {a, b};
  r.average = 61.234;
  r.succeeded = 1;
  return r;
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("fixed2") {
  CHECK(fixed2(82.456) == "82.46");
  CHECK(fixed2(0.0) == "0.00");
  CHECK(fixed2(-3.1) == "-3.10");
}

TEST_CASE("eval lines and table") {
  const auto r = sample_report();
  CHECK(eval_report_lines(r) ==
        "spearman\tSTS12\t61.23\npairs\tSTS12\t3\nalignment\tSTS12\t0.25\nuniformity\tSTS12\t-2.5\n"
        "status\tSICK/R\tfailed\nspearman\tavg\t61.23\ntasks_succeeded\tavg\t1\n");
  const auto table = eval_report_table(r);
  CHECK(table.find("Avg.") != std::string::npos);
  CHECK(table.find("failed  cannot open x") != std::string::npos);
  const auto j = eval_report_json(r);
  CHECK(j.at("tasks").size() == 2);
  CHECK(j.at("tasks")[1].at("failed") == true);
  CHECK(j.at("succeeded") == 1);
}

TEST_CASE("prediction tables round trip") {
  const auto dir = testing::temp_dir("report_pred");
  const auto r = sample_report();
  write_predictions(dir, r);
  CHECK(std::filesystem::exists(dir / "STS12.tsv"));
  CHECK(!std::filesystem::exists(dir / "SICK_R.tsv"));
  std::vector<double> g, p;
  read_prediction_table(dir / "STS12.tsv", g, p);
  CHECK(g == r.tasks[0].gold);
  CHECK(p == r.tasks[0].predicted);

  const std::vector<double> gold = {0.1, 4.9}, pred = {1.0 / 3.0, -0.7071067811865476};
  write_prediction_table(dir / "x.tsv", gold, pred);
  read_prediction_table(dir / "x.tsv", g, p);
  CHECK(g == gold);
  CHECK(p == pred);

  testing::write_file(dir / "bad.tsv", "gold\tpredicted\n1.0\n");
  CHECK_THROWS_AS(read_prediction_table(dir / "bad.tsv", g, p), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("distribution counts") {
  const std::vector<double> gold = {0.0, 0.99, 1.0, 4.2, 5.0, 3.5};
  const std::vector<double> pred = {-1.0, 0.0, 0.99, 1.0, 0.5, -0.26};
  const auto c = distribution_counts(gold, pred, 4);
  REQUIRE(c.size() == 5);
  CHECK(c[0] == std::vector<std::size_t>{1, 0, 1, 0});
  CHECK(c[1] == std::vector<std::size_t>{0, 0, 0, 1});
  CHECK(c[2] == std::vector<std::size_t>{0, 0, 0, 0});
  CHECK(c[3] == std::vector<std::size_t>{0, 1, 0, 0});
  CHECK(c[4] == std::vector<std::size_t>{0, 0, 0, 2});
  std::size_t total = 0;
  for (const auto& row : c) total = std::accumulate(row.begin(), row.end(), total);
  CHECK(total == gold.size());
  CHECK_THROWS_AS(distribution_counts(gold, pred, 0), Error);
}

TEST_CASE("distribution svg") {
  const std::vector<double> gold = {0.5, 1.5, 2.5, 3.5, 4.5};
  const std::vector<double> pred = {-0.5, 0.0, 0.2, 0.6, 0.9};
  const auto svg = distribution_svg(gold, pred, "toy", 10);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(count(svg, ">gold ") == 5);
  CHECK(svg.find(">gold 4-5<") < svg.find(">gold 0-1<"));
  CHECK(count(svg, "fill=\"#4a78b5\"") == 5);
}

TEST_CASE("ablation tables") {
  std::vector<AblationCell> cells(2);
  cells[0].label = "denoise_mode=pad";
  cells[0].average = 70.0;
  cells[0].tasks = {{"STS-B", 70.0}};
  cells[1].label = "denoise_mode=none";
  cells[1].error = "non-finite loss";
  const auto t = ablation_table(cells);
  CHECK(t.find("70.00") != std::string::npos);
  CHECK(t.find("failed  non-finite loss") != std::string::npos);
  CHECK(ablation_lines(cells) ==
        "spearman\tdenoise_mode=pad/STS-B\t70.00\nspearman\tdenoise_mode=pad/avg\t70.00\n"
        "status\tdenoise_mode=none\tfailed\n");
}
