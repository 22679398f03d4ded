#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "marvel/evaluation.hpp"
#include "marvel/metrics.hpp"
#include "marvel/trainer.hpp"

namespace marvel::io {

inline constexpr const char* kEpisodeLogHeader = "step,agent,action_mph,nu,occ,r1,r2,r3,total";
inline constexpr const char* kLearningCurveHeader =
    "step,seed,mean_total,mean_r1,mean_r2,mean_r3,actor_loss,critic_loss,entropy";
inline constexpr const char* kReportHeader =
    "controller,scenario,seed,ok,adaptation,stepdown,normalized_cvs,cvs_flagged,max_queue_mi";

// Shortest text that parses back to the same double.
std::string format_double(double v);
// Splits on commas; no quoting (none of our fields need it).
std::vector<std::string> split_csv_line(const std::string& line);
// Strict number parse; throws ValidationError naming `what` on failure.
double parse_double(const std::string& s, const std::string& what);

void write_episode_log(std::ostream& out, std::span<const metrics::EpisodeLogRow> rows);
std::vector<metrics::EpisodeLogRow> read_episode_log(std::istream& in);

// Header "gantry,milepoint,0,1,...", one row per gantry, downstream-first.
void write_grid(std::ostream& out, const eval::Grid& grid);
eval::Grid read_grid(std::istream& in);

void write_learning_curve(std::ostream& out, std::span<const train::CurvePoint> rows,
                          bool header = true);
std::vector<train::CurvePoint> read_learning_curve(std::istream& in);

void write_report_csv(std::ostream& out, std::span<const eval::EvaluationReport> reports);

// File helpers; throw std::runtime_error when the file cannot be opened.
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace marvel::io
