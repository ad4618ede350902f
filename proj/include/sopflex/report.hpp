#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sopflex/harness.hpp"
#include "sopflex/sopcore.hpp"

namespace sopflex {

// Series for the hand-rolled SVG line charts.
struct SvgSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<SvgSeries>& series);

// Overlaid filled polygons (capability charts) on a symmetric square frame.
std::string render_polygon_chart(const std::string& title,
                                 const std::vector<std::pair<std::string, Polygon>>& polygons);

// Caveat appended to the summary table: results are profile-dependent.
std::string report_footer_note();

// Writes summary.csv, hourly_losses.csv, powers_<case>.csv, fic_<case>.csv
// and the SVG analogues into out_dir (created if missing). All writes are
// atomic and byte-deterministic.
void write_report(const std::string& out_dir, const ComparisonReport& report);

}  // namespace sopflex
