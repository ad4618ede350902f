#include "sopflex/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "sopflex/errors.hpp"
#include "sopflex/ioutil.hpp"

namespace sopflex {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string fmt2(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string fmt_tick(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string safe_name(const std::string& name) {
    std::string out;
    for (char c : name)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return out.empty() ? std::string("case") : out;
}

struct Frame {
    double x0, x1, y0, y1;        // data ranges
    double px0, px1, py0, py1;    // pixel box (py0 = top)
    double sx(double x) const { return px0 + (x - x0) / (x1 - x0) * (px1 - px0); }
    double sy(double y) const { return py1 - (y - y0) / (y1 - y0) * (py1 - py0); }
};

void axes(std::string& svg, const Frame& f, const std::string& x_label,
          const std::string& y_label) {
    for (int k = 0; k <= 5; ++k) {
        double xv = f.x0 + k * (f.x1 - f.x0) / 5.0;
        double yv = f.y0 + k * (f.y1 - f.y0) / 5.0;
        double px = f.sx(xv), py = f.sy(yv);
        svg += "<line x1='" + fmt2(px) + "' y1='" + fmt2(f.py0) + "' x2='" + fmt2(px) + "' y2='" +
               fmt2(f.py1) + "' stroke='#dddddd' stroke-width='0.7'/>\n";
        svg += "<line x1='" + fmt2(f.px0) + "' y1='" + fmt2(py) + "' x2='" + fmt2(f.px1) +
               "' y2='" + fmt2(py) + "' stroke='#dddddd' stroke-width='0.7'/>\n";
        svg += "<text x='" + fmt2(px) + "' y='" + fmt2(f.py1 + 18) +
               "' font-size='11' text-anchor='middle' fill='#333333'>" + fmt_tick(xv) +
               "</text>\n";
        svg += "<text x='" + fmt2(f.px0 - 8) + "' y='" + fmt2(py + 4) +
               "' font-size='11' text-anchor='end' fill='#333333'>" + fmt_tick(yv) + "</text>\n";
    }
    svg += "<rect x='" + fmt2(f.px0) + "' y='" + fmt2(f.py0) + "' width='" +
           fmt2(f.px1 - f.px0) + "' height='" + fmt2(f.py1 - f.py0) +
           "' fill='none' stroke='#333333' stroke-width='1'/>\n";
    svg += "<text x='" + fmt2(0.5 * (f.px0 + f.px1)) + "' y='" + fmt2(f.py1 + 38) +
           "' font-size='13' text-anchor='middle' fill='#111111'>" + xml_escape(x_label) +
           "</text>\n";
    svg += "<text x='18' y='" + fmt2(0.5 * (f.py0 + f.py1)) +
           "' font-size='13' text-anchor='middle' fill='#111111' transform='rotate(-90 18 " +
           fmt2(0.5 * (f.py0 + f.py1)) + ")'>" + xml_escape(y_label) + "</text>\n";
}

}  // namespace

std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<SvgSeries>& series) {
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    bool first = true;
    for (const auto& s : series)
        for (auto [x, y] : s.points) {
            if (first) {
                x0 = x1 = x;
                y0 = y1 = y;
                first = false;
            }
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    if (x1 - x0 < 1e-12) x1 = x0 + 1;
    double pad = std::max(0.05 * (y1 - y0), 1e-9);
    y0 -= pad;
    y1 += pad;

    Frame f{x0, x1, y0, y1, 70, 660, 44, 450};
    std::string svg =
        "<svg xmlns='http://www.w3.org/2000/svg' viewBox='0 0 860 500' width='860' "
        "height='500'>\n<rect width='860' height='500' fill='white'/>\n";
    svg += "<text x='365' y='24' font-size='15' text-anchor='middle' fill='#111111'>" +
           xml_escape(title) + "</text>\n";
    axes(svg, f, x_label, y_label);
    for (size_t i = 0; i < series.size(); ++i) {
        const char* color = kPalette[i % kPaletteSize];
        std::string pts;
        for (auto [x, y] : series[i].points)
            pts += fmt2(f.sx(x)) + "," + fmt2(f.sy(y)) + " ";
        if (!pts.empty()) pts.pop_back();
        svg += std::string("<polyline fill='none' stroke='") + color +
               "' stroke-width='1.6' points='" + pts + "'/>\n";
        double ly = 60.0 + 20.0 * static_cast<double>(i);
        svg += std::string("<line x1='680' y1='") + fmt2(ly) + "' x2='706' y2='" + fmt2(ly) +
               "' stroke='" + color + "' stroke-width='2'/>\n";
        svg += "<text x='712' y='" + fmt2(ly + 4) + "' font-size='12' fill='#111111'>" +
               xml_escape(series[i].label) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

std::string render_polygon_chart(const std::string& title,
                                 const std::vector<std::pair<std::string, Polygon>>& polygons) {
    double bound = 0.1;
    for (const auto& [label, poly] : polygons)
        for (const auto& v : poly) bound = std::max({bound, std::abs(v.p1), std::abs(v.p2)});
    bound *= 1.12;

    Frame f{-bound, bound, -bound, bound, 60, 520, 44, 504};
    std::string svg =
        "<svg xmlns='http://www.w3.org/2000/svg' viewBox='0 0 580 560' width='580' "
        "height='560'>\n<rect width='580' height='560' fill='white'/>\n";
    svg += "<text x='290' y='24' font-size='15' text-anchor='middle' fill='#111111'>" +
           xml_escape(title) + "</text>\n";
    axes(svg, f, "P1 (pu)", "P2 (pu)");
    // zero axes
    svg += "<line x1='" + fmt2(f.sx(0)) + "' y1='" + fmt2(f.py0) + "' x2='" + fmt2(f.sx(0)) +
           "' y2='" + fmt2(f.py1) + "' stroke='#888888' stroke-width='0.8'/>\n";
    svg += "<line x1='" + fmt2(f.px0) + "' y1='" + fmt2(f.sy(0)) + "' x2='" + fmt2(f.px1) +
           "' y2='" + fmt2(f.sy(0)) + "' stroke='#888888' stroke-width='0.8'/>\n";

    for (size_t i = 0; i < polygons.size(); ++i) {
        const char* color = kPalette[i % kPaletteSize];
        const Polygon& poly = polygons[i].second;
        if (poly.size() >= 3) {
            std::string d = "M";
            for (size_t k = 0; k < poly.size(); ++k) {
                d += fmt2(f.sx(poly[k].p1)) + " " + fmt2(f.sy(poly[k].p2));
                d += k + 1 < poly.size() ? " L" : " Z";
            }
            svg += std::string("<path d='") + d + "' fill='" + color +
                   "' fill-opacity='0.22' stroke='" + color + "' stroke-width='1.6'/>\n";
        } else if (poly.size() == 2) {
            svg += std::string("<line x1='") + fmt2(f.sx(poly[0].p1)) + "' y1='" +
                   fmt2(f.sy(poly[0].p2)) + "' x2='" + fmt2(f.sx(poly[1].p1)) + "' y2='" +
                   fmt2(f.sy(poly[1].p2)) + "' stroke='" + color + "' stroke-width='2'/>\n";
        } else if (poly.size() == 1) {
            svg += std::string("<circle cx='") + fmt2(f.sx(poly[0].p1)) + "' cy='" +
                   fmt2(f.sy(poly[0].p2)) + "' r='3' fill='" + color + "'/>\n";
        }
        double ly = 60.0 + 20.0 * static_cast<double>(i);
        svg += std::string("<line x1='66' y1='") + fmt2(ly) + "' x2='88' y2='" + fmt2(ly) +
               "' stroke='" + color + "' stroke-width='2'/>\n";
        svg += "<text x='94' y='" + fmt2(ly + 4) + "' font-size='12' fill='#111111'>" +
               xml_escape(polygons[i].first) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

std::string report_footer_note() {
    return "Bundled demand/wind/PV profiles are synthetic fixtures. Absolute loss-reduction "
           "(kWh/day) and utilization figures depend entirely on the input profile series and "
           "are not comparable to values computed from other datasets; per-hour dominance and "
           "surrogate-fidelity checks are the supported basis for comparison.";
}

void write_report(const std::string& out_dir, const ComparisonReport& report) {
    if (report.rows.empty()) throw ValidationError("report has no rows");
    std::filesystem::create_directories(out_dir);
    auto path = [&](const std::string& leaf) { return out_dir + "/" + leaf; };

    // summary table
    std::string summary =
        "case,alpha_1,alpha_2,alpha_3,p_plus_kva,loss_reduction_kwh,reduction_vs_first_pct,"
        "utilization_eta,eta_vs_first_pct\n";
    for (const auto& row : report.rows) {
        summary += row.name + "," + format_double(row.design.alpha[0]) + "," +
                   format_double(row.design.alpha[1]) + "," + format_double(row.design.alpha[2]) +
                   "," + format_double(row.design.p_plus_kva) + "," +
                   format_double(row.day.loss_reduction_kwh) + "," +
                   format_double(row.reduction_vs_first_pct) + "," +
                   format_double(row.day.utilization_eta) + "," +
                   format_double(row.eta_vs_first_pct) + "\n";
    }
    summary += "# " + report_footer_note() + "\n";
    write_file_atomic(path("summary.csv"), summary);

    // hourly losses, shared baseline column
    std::string hourly = "hour,baseline_kw";
    for (const auto& row : report.rows) {
        hourly += ",total_" + safe_name(row.name) + "_kw,ratio_" + safe_name(row.name);
    }
    hourly += "\n";
    for (int t = 0; t < kHoursPerDay; ++t) {
        const auto& ref = report.rows.front().day.hours[t];
        hourly += std::to_string(t + 1) + "," + format_double(ref.baseline_loss_kw);
        for (const auto& row : report.rows) {
            const auto& hr = row.day.hours[t];
            hourly += "," + format_double(hr.optimized_total_kw) + "," +
                      format_double(hr.optimized_total_kw / hr.baseline_loss_kw);
        }
        hourly += "\n";
    }
    write_file_atomic(path("hourly_losses.csv"), hourly);

    std::vector<SvgSeries> loss_series;
    {
        SvgSeries base{"baseline", {}};
        for (int t = 0; t < kHoursPerDay; ++t)
            base.points.push_back({t + 1.0, report.rows.front().day.hours[t].baseline_loss_kw});
        loss_series.push_back(std::move(base));
        for (const auto& row : report.rows) {
            SvgSeries s{"case " + row.name, {}};
            for (int t = 0; t < kHoursPerDay; ++t)
                s.points.push_back({t + 1.0, row.day.hours[t].optimized_total_kw});
            loss_series.push_back(std::move(s));
        }
    }
    write_file_atomic(path("hourly_losses.svg"),
                      render_line_chart("Hourly losses, baseline vs optimized", "hour",
                                        "loss (kW)", loss_series));

    for (const auto& row : report.rows) {
        std::string name = safe_name(row.name);

        std::string powers = "hour,p1_kw,p2_kw,p3_kw,state\n";
        for (const auto& hr : row.day.hours)
            powers += std::to_string(hr.hour) + "," + format_double(hr.dispatch.p_inj[0]) + "," +
                      format_double(hr.dispatch.p_inj[1]) + "," +
                      format_double(hr.dispatch.p_inj[2]) + "," + hr.dispatch.state.label() + "\n";
        write_file_atomic(path("powers_" + name + ".csv"), powers);

        std::string fic = "hour,fic1_kw,fic2_kw,fic3_kw\n";
        for (const auto& hr : row.day.hours)
            fic += std::to_string(hr.hour) + "," + format_double(hr.fic_kw[0]) + "," +
                   format_double(hr.fic_kw[1]) + "," + format_double(hr.fic_kw[2]) + "\n";
        write_file_atomic(path("fic_" + name + ".csv"), fic);

        std::vector<SvgSeries> pseries;
        for (int j = 0; j < 3; ++j) {
            SvgSeries s{"P" + std::to_string(j + 1), {}};
            for (const auto& hr : row.day.hours)
                s.points.push_back({static_cast<double>(hr.hour), hr.dispatch.p_inj[j]});
            pseries.push_back(std::move(s));
        }
        write_file_atomic(path("powers_" + name + ".svg"),
                          render_line_chart("Feeder draws, case " + row.name, "hour",
                                            "power (kW)", pseries));

        std::vector<SvgSeries> fseries;
        for (int j = 0; j < 3; ++j) {
            SvgSeries s{"FIC" + std::to_string(j + 1), {}};
            for (const auto& hr : row.day.hours)
                s.points.push_back({static_cast<double>(hr.hour), hr.fic_kw[j]});
            fseries.push_back(std::move(s));
        }
        write_file_atomic(path("fic_" + name + ".svg"),
                          render_line_chart("FIC trajectory, case " + row.name, "hour",
                                            "FIC (kW)", fseries));
    }
}

}  // namespace sopflex
