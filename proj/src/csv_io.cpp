#include "marvel/csv_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <system_error>

#include "marvel/units.hpp"

namespace marvel::io {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  std::size_t b = s.find_first_not_of(" \t");
  std::size_t e = s.find_last_not_of(" \t");
  if (b == std::string::npos) throw ValidationError(what + ": empty number");
  const char* first = s.data() + b;
  const char* last = s.data() + e + 1;
  double v = 0.0;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ValidationError(what + ": '" + s + "' is not a number");
  }
  return v;
}

namespace {

// Reads the header line and checks it verbatim.
void expect_header(std::istream& in, const std::string& header, const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(what + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) {
    throw ValidationError(what + ": header '" + line + "' does not match '" + header + "'");
  }
}

std::vector<double> numeric_row(const std::string& line, std::size_t expected,
                                const std::string& what, int line_no) {
  const auto fields = split_csv_line(line);
  const std::string where = what + " line " + std::to_string(line_no);
  if (fields.size() != expected) {
    throw ValidationError(where + ": expected " + std::to_string(expected) + " fields, got " +
                          std::to_string(fields.size()));
  }
  std::vector<double> v;
  v.reserve(fields.size());
  for (const auto& f : fields) v.push_back(parse_double(f, where));
  return v;
}

}  // namespace

void write_episode_log(std::ostream& out, std::span<const metrics::EpisodeLogRow> rows) {
  out << kEpisodeLogHeader << '\n';
  for (const auto& r : rows) {
    out << r.step << ',' << r.agent << ',' << format_double(r.action_mph) << ','
        << format_double(r.nu) << ',' << format_double(r.occ) << ',' << format_double(r.r1)
        << ',' << format_double(r.r2) << ',' << format_double(r.r3) << ','
        << format_double(r.total) << '\n';
  }
}

std::vector<metrics::EpisodeLogRow> read_episode_log(std::istream& in) {
  expect_header(in, kEpisodeLogHeader, "episode log");
  std::vector<metrics::EpisodeLogRow> rows;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto v = numeric_row(line, 9, "episode log", line_no);
    rows.push_back(metrics::EpisodeLogRow{static_cast<int>(v[0]), static_cast<int>(v[1]), v[2],
                                          v[3], v[4], v[5], v[6], v[7], v[8]});
  }
  return rows;
}

void write_grid(std::ostream& out, const eval::Grid& g) {
  out << "gantry,milepoint";
  for (int c = 0; c < g.cols; ++c) out << ',' << c;
  out << '\n';
  for (int r = 0; r < g.rows(); ++r) {
    out << r << ',' << format_double(g.milepoints[static_cast<std::size_t>(r)]);
    for (int c = 0; c < g.cols; ++c) out << ',' << format_double(g.at(r, c));
    out << '\n';
  }
}

eval::Grid read_grid(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("grid: missing header");
  const auto head = split_csv_line(line);
  if (head.size() < 2 || head[0] != "gantry" || head[1] != "milepoint") {
    throw ValidationError("grid: header must start with gantry,milepoint");
  }
  eval::Grid g;
  g.cols = static_cast<int>(head.size()) - 2;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto v = numeric_row(line, head.size(), "grid", line_no);
    g.milepoints.push_back(v[1]);
    g.values.insert(g.values.end(), v.begin() + 2, v.end());
  }
  return g;
}

void write_learning_curve(std::ostream& out, std::span<const train::CurvePoint> rows,
                          bool header) {
  if (header) out << kLearningCurveHeader << '\n';
  for (const auto& p : rows) {
    out << p.step << ',' << p.seed << ',' << format_double(p.mean_total) << ','
        << format_double(p.mean_r1) << ',' << format_double(p.mean_r2) << ','
        << format_double(p.mean_r3) << ',' << format_double(p.actor_loss) << ','
        << format_double(p.critic_loss) << ',' << format_double(p.entropy) << '\n';
  }
}

std::vector<train::CurvePoint> read_learning_curve(std::istream& in) {
  expect_header(in, kLearningCurveHeader, "learning curve");
  std::vector<train::CurvePoint> rows;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 9) {
      throw ValidationError("learning curve line " + std::to_string(line_no) +
                            ": expected 9 fields");
    }
    train::CurvePoint p;
    const std::string where = "learning curve line " + std::to_string(line_no);
    p.step = std::stoll(f[0]);
    p.seed = std::stoull(f[1]);
    p.mean_total = parse_double(f[2], where);
    p.mean_r1 = parse_double(f[3], where);
    p.mean_r2 = parse_double(f[4], where);
    p.mean_r3 = parse_double(f[5], where);
    p.actor_loss = parse_double(f[6], where);
    p.critic_loss = parse_double(f[7], where);
    p.entropy = parse_double(f[8], where);
    rows.push_back(p);
  }
  return rows;
}

void write_report_csv(std::ostream& out, std::span<const eval::EvaluationReport> reports) {
  out << kReportHeader << '\n';
  for (const auto& r : reports) {
    for (const auto& run : r.runs) {
      out << r.controller << ',' << r.scenario << ',' << run.seed << ',' << (run.ok ? 1 : 0)
          << ',' << run.adaptation << ',' << run.stepdown << ','
          << format_double(run.normalized_cvs) << ',' << (run.cvs_flagged ? 1 : 0) << ','
          << format_double(run.max_queue_mi) << '\n';
    }
    out << r.controller << ',' << r.scenario << ",mean," << r.completed << ','
        << format_double(r.adaptation.mean) << ',' << format_double(r.stepdown.mean) << ','
        << format_double(r.normalized_cvs.mean) << ",," << format_double(r.max_queue_mi.mean)
        << '\n';
    out << r.controller << ',' << r.scenario << ",std," << r.completed << ','
        << format_double(r.adaptation.std) << ',' << format_double(r.stepdown.std) << ','
        << format_double(r.normalized_cvs.std) << ",," << format_double(r.max_queue_mi.std)
        << '\n';
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace marvel::io
