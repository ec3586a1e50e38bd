#include "cotbert/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cotbert/error.hpp"

namespace cotbert {
namespace {

std::string safe_name(const std::string& name) {
  std::string out = name;
  for (char& c : out) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
  }
  return out.empty() ? "task" : out;
}

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string pad_right(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }
std::string pad_left(const std::string& s, std::size_t w) { return s.size() >= w ? s : std::string(w - s.size(), ' ') + s; }

constexpr const char* kBucketLabels[5] = {"0-1", "1-2", "2-3", "3-4", "4-5"};

std::size_t bucket_of(double gold) {
  const auto b = static_cast<long>(std::floor(gold));
  return static_cast<std::size_t>(std::clamp<long>(b, 0, 4));
}

}  // namespace

std::string fixed2(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string eval_report_lines(const EvalReport& report) {
  std::ostringstream os;
  for (const auto& t : report.tasks) {
    if (t.failed) {
      os << "status\t" << t.name << "\tfailed\n";
      continue;
    }
    os << "spearman\t" << t.name << '\t' << fixed2(t.spearman) << '\n';
    os << "pairs\t" << t.name << '\t' << t.pairs << '\n';
    if (t.alignment) os << "alignment\t" << t.name << '\t' << num(*t.alignment) << '\n';
    if (t.uniformity) os << "uniformity\t" << t.name << '\t' << num(*t.uniformity) << '\n';
  }
  os << "spearman\tavg\t" << fixed2(report.average) << '\n';
  os << "tasks_succeeded\tavg\t" << report.succeeded << '\n';
  return os.str();
}

std::string eval_report_table(const EvalReport& report) {
  std::size_t w = 4;
  for (const auto& t : report.tasks) w = std::max(w, t.name.size());
  std::ostringstream os;
  os << "# Spearman x100; Avg. weights every successful task equally\n";
  os << pad_right("task", w) << "  " << pad_left("pairs", 6) << "  " << pad_left("spearman", 8) << '\n';
  for (const auto& t : report.tasks) {
    os << pad_right(t.name, w) << "  " << pad_left(std::to_string(t.pairs), 6) << "  "
       << pad_left(t.failed ? "failed" : fixed2(t.spearman), 8);
    if (t.failed) os << "  " << t.error;
    os << '\n';
  }
  os << pad_right("Avg.", w) << "  " << pad_left("", 6) << "  " << pad_left(fixed2(report.average), 8) << '\n';
  return os.str();
}

nlohmann::json eval_report_json(const EvalReport& report) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : report.tasks) {
    nlohmann::json j = {{"name", t.name}, {"failed", t.failed}};
    if (t.failed) {
      j["error"] = t.error;
    } else {
      j["pairs"] = t.pairs;
      j["spearman"] = t.spearman;
      if (t.alignment) j["alignment"] = *t.alignment;
      if (t.uniformity) j["uniformity"] = *t.uniformity;
    }
    tasks.push_back(std::move(j));
  }
  return {{"tasks", tasks},
          {"average", report.average},
          {"succeeded", report.succeeded},
          {"average_weighting", "equal per task"},
          {"embedding_normalization", "l2 before alignment/uniformity"}};
}

void write_prediction_table(const std::filesystem::path& path, std::span<const double> gold,
                            std::span<const double> predicted) {
  require(gold.size() == predicted.size(), ErrorKind::shape, "gold and predicted lengths differ");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  require(out.good(), ErrorKind::io, "cannot write " + path.string());
  out << "gold\tpredicted\n";
  char buf[96];
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g\t%.17g\n", gold[i], predicted[i]);
    out << buf;
  }
}

void write_predictions(const std::filesystem::path& dir, const EvalReport& report) {
  for (const auto& t : report.tasks) {
    if (!t.failed) write_prediction_table(dir / (safe_name(t.name) + ".tsv"), t.gold, t.predicted);
  }
}

void read_prediction_table(const std::filesystem::path& path, std::vector<double>& gold, std::vector<double>& predicted) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::io, "cannot open " + path.string());
  gold.clear();
  predicted.clear();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (lineno == 1 && line.rfind("gold", 0) == 0)) continue;
    std::istringstream row(line);
    double g = 0.0, p = 0.0;
    require(static_cast<bool>(row >> g >> p), ErrorKind::input,
            path.string() + ":" + std::to_string(lineno) + ": expected gold<TAB>predicted");
    gold.push_back(g);
    predicted.push_back(p);
  }
  require(!gold.empty(), ErrorKind::input, path.string() + " has no rows");
}

std::vector<std::vector<std::size_t>> distribution_counts(std::span<const double> gold,
                                                          std::span<const double> predicted, std::size_t bins) {
  require(gold.size() == predicted.size(), ErrorKind::shape, "gold and predicted lengths differ");
  require(bins > 0, ErrorKind::config, "histogram needs at least one bin");
  std::vector<std::vector<std::size_t>> counts(5, std::vector<std::size_t>(bins, 0));
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const double u = std::clamp((predicted[i] + 1.0) / 2.0, 0.0, 1.0);
    const auto bin = std::min(bins - 1, static_cast<std::size_t>(u * static_cast<double>(bins)));
    ++counts[bucket_of(gold[i])][bin];
  }
  return counts;
}

std::string distribution_svg(std::span<const double> gold, std::span<const double> predicted, const std::string& title,
                             std::size_t bins) {
  const auto counts = distribution_counts(gold, predicted, bins);
  const double left = 70, top = 40, panel_w = 480, panel_h = 90, gap = 18;
  const double width = left + panel_w + 30;
  const double height = top + 5 * (panel_h + gap) + 30;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\" "
     << "font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  const double bar_w = panel_w / static_cast<double>(bins);
  // Highest bucket on top, as in the usual layout.
  for (std::size_t row = 0; row < 5; ++row) {
    const std::size_t bucket = 4 - row;
    const auto& c = counts[bucket];
    const std::size_t peak = std::max<std::size_t>(1, *std::max_element(c.begin(), c.end()));
    const double y0 = top + static_cast<double>(row) * (panel_h + gap);
    os << "<rect x=\"" << left << "\" y=\"" << y0 << "\" width=\"" << panel_w << "\" height=\"" << panel_h
       << "\" fill=\"none\" stroke=\"#999\"/>\n";
    os << "<text x=\"" << left - 8 << "\" y=\"" << y0 + panel_h / 2 << "\" text-anchor=\"end\">gold " << kBucketLabels[bucket]
       << "</text>\n";
    for (std::size_t b = 0; b < bins; ++b) {
      if (c[b] == 0) continue;
      const double h = panel_h * static_cast<double>(c[b]) / static_cast<double>(peak);
      os << "<rect x=\"" << left + static_cast<double>(b) * bar_w << "\" y=\"" << y0 + panel_h - h << "\" width=\""
         << bar_w << "\" height=\"" << h << "\" fill=\"#4a78b5\"/>\n";
    }
  }
  const double axis_y = top + 5 * (panel_h + gap) - gap + 14;
  for (int t = 0; t <= 4; ++t) {
    const double v = -1.0 + 0.5 * t;
    os << "<text x=\"" << left + panel_w * (v + 1.0) / 2.0 << "\" y=\"" << axis_y << "\" text-anchor=\"middle\">"
       << fixed2(v) << "</text>\n";
  }
  os << "<text x=\"" << left + panel_w / 2 << "\" y=\"" << axis_y + 14 << "\" text-anchor=\"middle\">predicted cosine</text>\n";
  os << "</svg>\n";
  return os.str();
}

std::string ablation_table(std::span<const AblationCell> cells) {
  std::vector<std::string> task_names;
  for (const auto& c : cells) {
    for (const auto& [name, _] : c.tasks) {
      if (std::find(task_names.begin(), task_names.end(), name) == task_names.end()) task_names.push_back(name);
    }
  }
  std::size_t w = 7;
  for (const auto& c : cells) w = std::max(w, c.label.size());
  std::ostringstream os;
  os << pad_right("variant", w);
  for (const auto& n : task_names) os << "  " << pad_left(n, std::max<std::size_t>(8, n.size()));
  os << "  " << pad_left("Avg.", 8) << '\n';
  for (const auto& c : cells) {
    os << pad_right(c.label, w);
    for (const auto& n : task_names) {
      std::string v = "-";
      for (const auto& [name, value] : c.tasks) {
        if (name == n) v = value ? fixed2(*value) : "failed";
      }
      os << "  " << pad_left(v, std::max<std::size_t>(8, n.size()));
    }
    os << "  " << pad_left(c.error.empty() && c.average ? fixed2(*c.average) : "failed", 8);
    if (!c.error.empty()) os << "  " << c.error;
    os << '\n';
  }
  return os.str();
}

std::string ablation_lines(std::span<const AblationCell> cells) {
  std::ostringstream os;
  for (const auto& c : cells) {
    if (!c.error.empty() || !c.average) {
      os << "status\t" << c.label << "\tfailed\n";
      continue;
    }
    for (const auto& [name, value] : c.tasks) {
      if (value) os << "spearman\t" << c.label << '/' << name << '\t' << fixed2(*value) << '\n';
    }
    os << "spearman\t" << c.label << "/avg\t" << fixed2(*c.average) << '\n';
  }
  return os.str();
}

}  // namespace cotbert
