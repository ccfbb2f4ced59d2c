#include "wqed/results.hpp"

#include "wqed/errors.hpp"
#include "wqed/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace wqed {

using nlohmann::json;

namespace {

void put(std::string& out, double v)
{
    char buf[40];
    if (std::isnan(v))
        out += "nan";
    else
        out.append(buf, static_cast<std::size_t>(std::snprintf(buf, sizeof buf, "%.17g", v)));
}

std::string fmt(double v, const char* spec = "%g")
{
    char buf[40];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string escape(std::string_view s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '&':
            out += "&amp;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

// 1-2-5 tick spacing with about `target` intervals.
double tick_step(double span, int target)
{
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw)
            return m * mag;
    return 10.0 * mag;
}

} // namespace

std::string csv_text(const Trajectory& traj, const ObservableSeries& obs)
{
    const std::size_t na = traj.n_atoms;
    const std::size_t steps = traj.steps();
    std::string out = "# units: " + std::string(kUnitNote) + "\n";
    out += "t";
    for (std::size_t i = 1; i <= na; ++i)
        out += ",re_alpha_" + std::to_string(i) + ",im_alpha_" + std::to_string(i);
    for (std::size_t i = 1; i <= na; ++i)
        out += ",Pe_" + std::to_string(i);
    out += ",Pe_total,Nb,norm_residual,Gamma_inst_total\n";

    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.reserve(out.size() + steps * (na * 3 + 5) * 24);
    for (std::size_t n = 0; n < steps; ++n) {
        put(out, traj.time(n));
        for (std::size_t i = 0; i < na; ++i) {
            out += ',';
            put(out, traj.alpha(n, i).real());
            out += ',';
            put(out, traj.alpha(n, i).imag());
        }
        for (std::size_t i = 0; i < na; ++i) {
            out += ',';
            put(out, obs.pe_at(n, i));
        }
        out += ',';
        put(out, obs.pe_total[n]);
        out += ',';
        put(out, n < traj.photon_number.size() ? traj.photon_number[n] : nan);
        out += ',';
        put(out, n < traj.norm_residual.size() ? traj.norm_residual[n] : nan);
        out += ',';
        // Gamma_inst in units of omega0, as -d/dt ln P.
        put(out, n < obs.gamma_total.size() ? obs.gamma_total[n] * obs.gamma : nan);
        out += '\n';
    }
    return out;
}

void write_text(const std::filesystem::path& path, std::string_view text)
{
    std::error_code ec;
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path(), ec);
    if (ec)
        throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot write " + tmp.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out)
            throw IoError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string manifest_text(const RunManifest& m)
{
    json j;
    j["scenario_hash"] = m.scenario_hash;
    j["code_version"] = m.code_version;
    j["state"] = m.state;
    j["units"] = std::string(kUnitNote);
    j["sign_convention"] = std::string(kSignConvention);
    json norms = json::object();
    for (const auto& [label, v] : m.pre_normalization_norms)
        norms[label] = v;
    j["pre_normalization_norms"] = norms;
    json ov = json::object();
    for (const auto& [flag, value] : m.overrides)
        ov[flag] = json::parse(value);
    j["overrides"] = ov;
    j["wall_seconds"] = m.wall_seconds;
    json runs = json::array();
    for (const auto& r : m.runs) {
        json e;
        e["file"] = r.file;
        e["label"] = r.label;
        e["solver"] = r.solver;
        e["gamma_ratio"] = r.gamma_ratio;
        e["status"] = r.status;
        e["steps"] = r.steps;
        e["last_valid_step"] = r.last_valid_step;
        if (!r.abort_reason.empty())
            e["abort_reason"] = r.abort_reason;
        e["max_norm_residual"] = r.max_norm_residual ? json(*r.max_norm_residual) : json(nullptr);
        e["final_pe_total"] = r.final_pe_total;
        e["wall_seconds"] = r.wall_seconds;
        e["kernel_evaluations"] = r.kernel_evaluations;
        runs.push_back(e);
    }
    j["runs"] = runs;
    j["scenario"] = m.scenario_text.empty() ? json(nullptr) : json::parse(m.scenario_text);
    return j.dump(2) + "\n";
}

std::string svg_text(const Plot& plot)
{
    constexpr double W = 720, H = 440, L = 80, R = 180, T = 40, B = 60;
    const double pw = W - L - R, ph = H - T - B;

    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : plot.series)
        for (std::size_t k = 0; k < s.x.size(); ++k) {
            if (plot.x_range && (s.x[k] < plot.x_range->first || s.x[k] > plot.x_range->second))
                continue;
            if (!std::isfinite(s.y[k]))
                continue;
            x0 = std::min(x0, s.x[k]);
            x1 = std::max(x1, s.x[k]);
            y0 = std::min(y0, s.y[k]);
            y1 = std::max(y1, s.y[k]);
        }
    if (plot.x_range) {
        x0 = plot.x_range->first;
        x1 = plot.x_range->second;
    }
    if (!std::isfinite(x0) || !(x1 > x0)) {
        x0 = 0.0;
        x1 = 1.0;
    }
    if (!std::isfinite(y0)) {
        y0 = 0.0;
        y1 = 1.0;
    }
    if (!(y1 - y0 > 1e-12 * std::max(1.0, std::abs(y1)))) {
        const double pad = std::max(1e-12, 0.05 * std::abs(y1));
        y0 -= pad;
        y1 += pad;
    }
    const double ypad = 0.05 * (y1 - y0);
    y0 -= ypad;
    y1 += ypad;

    auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * pw; };
    auto sy = [&](double y) { return T + (y1 - y) / (y1 - y0) * ph; };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(W) + "\" height=\"" + fmt(H) +
           "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + fmt(L + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" +
           escape(plot.title) + "</text>\n";
    out += "<rect x=\"" + fmt(L) + "\" y=\"" + fmt(T) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
           "\" fill=\"none\" stroke=\"black\"/>\n";

    const double dx = tick_step(x1 - x0, 8);
    for (double x = std::ceil(x0 / dx) * dx; x <= x1 + 1e-9 * dx; x += dx) {
        const double X = sx(x);
        out += "<line x1=\"" + fmt(X) + "\" y1=\"" + fmt(T + ph) + "\" x2=\"" + fmt(X) + "\" y2=\"" +
               fmt(T + ph + 5) + "\" stroke=\"black\"/>\n";
        out += "<text x=\"" + fmt(X) + "\" y=\"" + fmt(T + ph + 18) + "\" text-anchor=\"middle\">" +
               fmt(std::abs(x) < 1e-12 * dx ? 0.0 : x) + "</text>\n";
    }
    const double dy = tick_step(y1 - y0, 6);
    for (double y = std::ceil(y0 / dy) * dy; y <= y1 + 1e-9 * dy; y += dy) {
        const double Y = sy(y);
        out += "<line x1=\"" + fmt(L - 5) + "\" y1=\"" + fmt(Y) + "\" x2=\"" + fmt(L) + "\" y2=\"" + fmt(Y) +
               "\" stroke=\"black\"/>\n";
        out += "<line x1=\"" + fmt(L) + "\" y1=\"" + fmt(Y) + "\" x2=\"" + fmt(L + pw) + "\" y2=\"" + fmt(Y) +
               "\" stroke=\"#e0e0e0\"/>\n";
        out += "<text x=\"" + fmt(L - 8) + "\" y=\"" + fmt(Y + 4) + "\" text-anchor=\"end\">" +
               fmt(std::abs(y) < 1e-12 * dy ? 0.0 : y) + "</text>\n";
    }
    out += "<text x=\"" + fmt(L + pw / 2) + "\" y=\"" + fmt(H - 15) + "\" text-anchor=\"middle\">" +
           escape(plot.x_label) + "</text>\n";
    out += "<text transform=\"translate(20," + fmt(T + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
           escape(plot.y_label) + "</text>\n";

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};
    for (std::size_t s = 0; s < plot.series.size(); ++s) {
        const auto& ser = plot.series[s];
        const char* color = colors[s % std::size(colors)];
        // Keep at most ~2000 vertices; steps and jumps stay visible at that density.
        std::size_t first = 0, last = ser.x.size();
        if (plot.x_range) {
            while (first < last && ser.x[first] < x0)
                ++first;
            while (last > first && ser.x[last - 1] > x1)
                --last;
        }
        const std::size_t stride = std::max<std::size_t>(1, (last - first) / 2000);
        std::string pts;
        for (std::size_t k = first; k < last; k += stride) {
            if (!std::isfinite(ser.y[k]))
                continue;
            pts += fmt(sx(ser.x[k]), "%.2f") + "," + fmt(sy(std::clamp(ser.y[k], y0, y1)), "%.2f") + " ";
        }
        out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts +
               "\"/>\n";
        const double ly = T + 16 + 18 * static_cast<double>(s);
        out += "<line x1=\"" + fmt(L + pw + 8) + "\" y1=\"" + fmt(ly - 4) + "\" x2=\"" + fmt(L + pw + 28) +
               "\" y2=\"" + fmt(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        out += "<text x=\"" + fmt(L + pw + 32) + "\" y=\"" + fmt(ly) + "\">" + escape(ser.name) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

} // namespace wqed
