#include "plight/harness/report.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>

#include "plight/errors.hpp"
#include "plight/kv.hpp"
#include "plight/plot.hpp"

namespace plight::harness {

void write_summary_csv(std::ostream& out, std::span<const RunRecord> records) {
  out << "flow,method,seed,m_tt,m_th,m_q,ar,pe\n";
  for (const auto& r : records) {
    out << r.flow << ',' << r.method << ',' << r.seed << ',';
    if (r.episodes.empty()) {
      out << ",,";
    } else {
      const auto& m = r.episodes.back().metrics;
      out << format_double(m.m_tt) << ',' << m.m_th << ',' << format_double(m.m_q);
    }
    out << ',';
    if (r.ar_pe) out << format_double(r.ar_pe->ar) << ',' << format_double(r.ar_pe->pe);
    else out << ',';
    out << '\n';
  }
}

void write_learning_curves_svg(std::ostream& out, const std::string& title, std::span<const RunRecord> records) {
  std::map<std::pair<std::string, std::string>, std::vector<const RunRecord*>> groups;
  for (const auto& r : records) groups[{r.method, r.flow}].push_back(&r);
  std::vector<PlotSeries> series;
  for (const auto& [key, runs] : groups) {
    PlotSeries s;
    s.label = key.first + " " + key.second;
    std::size_t len = runs.front()->episodes.size();
    for (const auto* r : runs) len = std::min(len, r->episodes.size());
    for (std::size_t e = 0; e < len; ++e) {
      double sum = 0.0;
      for (const auto* r : runs) sum += r->episodes[e].metrics.m_tt;
      s.x.push_back(static_cast<double>(e + 1));
      s.y.push_back(sum / static_cast<double>(runs.size()));
    }
    series.push_back(std::move(s));
  }
  write_line_svg(out, title, "episode", "mean travel time (s)", series);
}

void write_text_file(const std::string& path, const std::string& contents) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << contents;
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

}  // namespace plight::harness
