#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include "plight/harness/experiments.hpp"

namespace plight::harness {

// CSV: flow,method,seed,m_tt,m_th,m_q,ar,pe (final-episode metrics).
void write_summary_csv(std::ostream& out, std::span<const RunRecord> records);

// Seed-averaged m_tt curve per (method, flow).
void write_learning_curves_svg(std::ostream& out, const std::string& title, std::span<const RunRecord> records);

void write_text_file(const std::string& path, const std::string& contents);

}  // namespace plight::harness
