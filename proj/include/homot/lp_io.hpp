#pragma once

#include "homot/lp.hpp"

#include <string>

namespace homot {

enum class ExportFormat { mps, lp_text };

ExportFormat export_format_from_string(const std::string& s);

struct ExportResult {
  std::string text;
  // one line per mangled name: "<short> <original>"; empty for lp_text
  std::string name_map;
};

// MPS fixed layout (NAME/OBJSENSE/ROWS/COLUMNS/RHS/BOUNDS/ENDATA, names mangled
// to <= 8 chars) or CPLEX-LP text with the original names.
ExportResult export_model(const LPModel& model, ExportFormat format);

// Parses the CPLEX-LP subset produced by export_model (round-trip guarantee).
LPModel parse_lp_text(const std::string& text);

}  // namespace homot
