#ifndef FLOWSCOPE_REPORT_HPP
#define FLOWSCOPE_REPORT_HPP

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace flowscope {

class EmptyUniverse : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class EmptyInput : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class NonPositiveBin : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// 2 decimal places, half-up.
double round_percent(double pct);

struct PercentRow {
    std::string label;
    uint64_t count = 0;
    uint64_t bytes = 0;
    double percent_by_count = 0;
    double percent_by_bytes = 0;
};

struct PercentTable {
    std::string title;
    std::vector<PercentRow> rows;

    uint64_t total_count() const;
    uint64_t total_bytes() const;
    std::string to_csv() const;
    std::string to_text() const;
};

struct LabeledCount {
    std::string label;
    uint64_t count = 0;
    uint64_t bytes = 0;
};

PercentTable percent_table(const std::string& title,
                           const std::vector<LabeledCount>& counts);

// Fold rows under `threshold_percent` (by count) into an "Other" row.
// Rows named in `keep` are never folded.
PercentTable fold_other(const PercentTable& table, double threshold_percent,
                        const std::vector<std::string>& keep = {});

enum class SeriesKind { Cdf, PdfHistogram };

struct DistributionSeries {
    SeriesKind kind = SeriesKind::Cdf;
    std::string variable;
    std::vector<std::pair<double, double>> points;
    double bin_width = 0;   // PDF only
    bool log_x = false;
    std::string to_csv() const;
};

// Exact empirical CDF: one point per distinct value, final y = 1.
DistributionSeries build_cdf(std::vector<double> values, bool log_x = false);

// Histogram over [0, max] with half-open bins [k*w, (k+1)*w); y is the bin
// mass (count / total), x the bin's left edge. Empty interior bins included.
DistributionSeries build_pdf(const std::vector<double>& values, double bin_width = 3.0);

// Fraction of total bytes carried by flows satisfying the predicate.
// Items are (bytes, duration_s) style pairs via accessor to stay generic.
struct FlowVolume {
    uint64_t bytes;
    double duration_s;
    uint64_t length_pkts;
};

double volume_share(const std::vector<FlowVolume>& flows,
                    const std::function<bool(const FlowVolume&)>& predicate);

}  // namespace flowscope

#endif
