#include "flowscope/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace flowscope {

double round_percent(double pct) { return std::floor(pct * 100.0 + 0.5) / 100.0; }

uint64_t PercentTable::total_count() const {
    uint64_t t = 0;
    for (const auto& r : rows) t += r.count;
    return t;
}

uint64_t PercentTable::total_bytes() const {
    uint64_t t = 0;
    for (const auto& r : rows) t += r.bytes;
    return t;
}

std::string PercentTable::to_csv() const {
    std::ostringstream out;
    out << "label,count,bytes,percent_by_count,percent_by_bytes\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.2f,%.2f", r.percent_by_count,
                      r.percent_by_bytes);
        out << r.label << ',' << r.count << ',' << r.bytes << ',' << buf << '\n';
    }
    return out.str();
}

std::string PercentTable::to_text() const {
    std::ostringstream out;
    out << title << '\n';
    size_t width = 5;
    for (const auto& r : rows) width = std::max(width, r.label.size());
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "  %-*s %12llu pkts/flows %6.2f%%  %14llu B %6.2f%%\n",
                      static_cast<int>(width), r.label.c_str(),
                      static_cast<unsigned long long>(r.count), r.percent_by_count,
                      static_cast<unsigned long long>(r.bytes), r.percent_by_bytes);
        out << buf;
    }
    return out.str();
}

PercentTable percent_table(const std::string& title,
                           const std::vector<LabeledCount>& counts) {
    uint64_t total = 0, total_bytes = 0;
    for (const auto& c : counts) {
        total += c.count;
        total_bytes += c.bytes;
    }
    if (total == 0) throw EmptyUniverse(title + ": no counts");
    PercentTable table;
    table.title = title;
    for (const auto& c : counts) {
        PercentRow row;
        row.label = c.label;
        row.count = c.count;
        row.bytes = c.bytes;
        row.percent_by_count =
            round_percent(100.0 * static_cast<double>(c.count) / static_cast<double>(total));
        row.percent_by_bytes =
            total_bytes == 0 ? 0.0
                             : round_percent(100.0 * static_cast<double>(c.bytes) /
                                             static_cast<double>(total_bytes));
        table.rows.push_back(std::move(row));
    }
    return table;
}

PercentTable fold_other(const PercentTable& table, double threshold_percent,
                        const std::vector<std::string>& keep) {
    std::vector<LabeledCount> kept;
    LabeledCount other{"Other", 0, 0};
    bool folded = false;
    for (const auto& r : table.rows) {
        bool pinned = std::find(keep.begin(), keep.end(), r.label) != keep.end();
        if (!pinned && r.percent_by_count < threshold_percent) {
            other.count += r.count;
            other.bytes += r.bytes;
            folded = true;
        } else if (r.label == "Other") {
            other.count += r.count;
            other.bytes += r.bytes;
            folded = true;
        } else {
            kept.push_back({r.label, r.count, r.bytes});
        }
    }
    if (folded) kept.push_back(other);
    return percent_table(table.title, kept);
}

std::string DistributionSeries::to_csv() const {
    std::ostringstream out;
    out << "x,y\n";
    char buf[80];
    for (const auto& [x, y] : points) {
        std::snprintf(buf, sizeof buf, "%.9g,%.9g\n", x, y);
        out << buf;
    }
    return out.str();
}

DistributionSeries build_cdf(std::vector<double> values, bool log_x) {
    if (values.empty()) throw EmptyInput("build_cdf: no values");
    std::sort(values.begin(), values.end());
    DistributionSeries s;
    s.kind = SeriesKind::Cdf;
    s.log_x = log_x;
    size_t n = values.size();
    for (size_t i = 0; i < n; i++) {
        if (i + 1 < n && values[i + 1] == values[i]) continue;
        s.points.emplace_back(values[i],
                              static_cast<double>(i + 1) / static_cast<double>(n));
    }
    return s;
}

DistributionSeries build_pdf(const std::vector<double>& values, double bin_width) {
    if (values.empty()) throw EmptyInput("build_pdf: no values");
    if (bin_width <= 0) throw NonPositiveBin("build_pdf: bin width must be positive");
    double max_v = *std::max_element(values.begin(), values.end());
    size_t nbins = static_cast<size_t>(std::floor(max_v / bin_width)) + 1;
    std::vector<uint64_t> counts(nbins, 0);
    for (double v : values) {
        size_t bin = v <= 0 ? 0 : static_cast<size_t>(std::floor(v / bin_width));
        if (bin >= nbins) bin = nbins - 1;
        counts[bin]++;
    }
    DistributionSeries s;
    s.kind = SeriesKind::PdfHistogram;
    s.bin_width = bin_width;
    double n = static_cast<double>(values.size());
    for (size_t k = 0; k < nbins; k++)
        s.points.emplace_back(static_cast<double>(k) * bin_width,
                              static_cast<double>(counts[k]) / n);
    return s;
}

double volume_share(const std::vector<FlowVolume>& flows,
                    const std::function<bool(const FlowVolume&)>& predicate) {
    uint64_t total = 0, selected = 0;
    for (const auto& f : flows) {
        total += f.bytes;
        if (predicate(f)) selected += f.bytes;
    }
    if (total == 0) return 0.0;
    return static_cast<double>(selected) / static_cast<double>(total);
}

}  // namespace flowscope
