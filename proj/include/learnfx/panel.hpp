#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "learnfx/config.hpp"
#include "learnfx/stats.hpp"

// Panel ingestion and aggregation: raw experiment logs -> unit x window
// panel -> per-cohort per-window cell means, plus the SRM diagnostic.

namespace learnfx {

/// Input or configuration problem attributable to the caller's data.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Arm { control, treatment };
enum class ImputePolicy { zero, observed_only };
enum class BucketMode { calendar, exposure };
enum class DesignKind { two_cohort, ladder };

// ---------------------------------------------------------------------------
// CohortSchedule: per-cohort, per-window arm assignment.

class CohortSchedule {
  public:
    CohortSchedule(DesignKind design, int cohorts, int windows, std::vector<Arm> assignments)
        : design_(design), cohorts_(cohorts), windows_(windows),
          assignments_(std::move(assignments)) {
        validate();
    }

    /// Cohort 1 always control, cohort 2 always treatment.
    static CohortSchedule two_cohort(int windows) {
        if (windows < 1) throw DataError("two-cohort schedule needs at least 1 window");
        std::vector<Arm> a(static_cast<std::size_t>(2) * windows, Arm::control);
        for (int w = 0; w < windows; ++w) a[static_cast<std::size_t>(windows) + w] = Arm::treatment;
        return CohortSchedule(DesignKind::two_cohort, 2, windows, std::move(a));
    }

    /// Cohort 1 always control, cohort 2 always treatment, cohort i >= 3
    /// switches control -> treatment at window i-1. Windows = cohorts - 1.
    static CohortSchedule ladder(int cohorts) {
        if (cohorts < 3) throw DataError("ladder schedule needs at least 3 cohorts");
        int windows = cohorts - 1;
        std::vector<Arm> a(static_cast<std::size_t>(cohorts) * windows, Arm::control);
        for (int c = 2; c <= cohorts; ++c) {
            int first_treated = (c == 2) ? 1 : c - 1;
            for (int w = first_treated; w <= windows; ++w) {
                a[static_cast<std::size_t>(c - 1) * windows + (w - 1)] = Arm::treatment;
            }
        }
        return CohortSchedule(DesignKind::ladder, cohorts, windows, std::move(a));
    }

    DesignKind design() const { return design_; }
    int cohorts() const { return cohorts_; }
    int windows() const { return windows_; }

    Arm arm(int cohort, int window) const {
        if (cohort < 1 || cohort > cohorts_ || window < 1 || window > windows_) {
            throw DataError("schedule lookup out of range: cohort " + std::to_string(cohort) +
                            ", window " + std::to_string(window));
        }
        return assignments_[static_cast<std::size_t>(cohort - 1) * windows_ + (window - 1)];
    }

    /// First treated window of a cohort, or 0 if it is never treated.
    int first_treated_window(int cohort) const {
        for (int w = 1; w <= windows_; ++w) {
            if (arm(cohort, w) == Arm::treatment) return w;
        }
        return 0;
    }

  private:
    void validate() const {
        if (cohorts_ < 2) throw DataError("schedule needs at least 2 cohorts");
        if (windows_ < 1) throw DataError("schedule needs at least 1 window");
        if (assignments_.size() != static_cast<std::size_t>(cohorts_) * windows_) {
            throw DataError("schedule assignment matrix has wrong shape");
        }
        for (int w = 1; w <= windows_; ++w) {
            if (arm(1, w) != Arm::control) throw DataError("cohort 1 must stay in control");
            if (arm(2, w) != Arm::treatment) throw DataError("cohort 2 must stay in treatment");
        }
        if (design_ == DesignKind::two_cohort) {
            if (cohorts_ != 2) throw DataError("two-cohort design must have exactly 2 cohorts");
            return;
        }
        if (cohorts_ != windows_ + 1) {
            throw DataError("ladder design needs cohorts == windows + 1");
        }
        if (cohorts_ < 3) throw DataError("ladder design needs at least 3 cohorts");
        for (int c = 3; c <= cohorts_; ++c) {
            for (int w = 1; w <= windows_; ++w) {
                Arm expected = (w >= c - 1) ? Arm::treatment : Arm::control;
                if (arm(c, w) != expected) {
                    throw DataError("ladder cohort " + std::to_string(c) +
                                    " must switch to treatment exactly at window " +
                                    std::to_string(c - 1));
                }
            }
        }
    }

    DesignKind design_;
    int cohorts_;
    int windows_;
    std::vector<Arm> assignments_;
};

// ---------------------------------------------------------------------------
// ExperimentPanel: immutable unit x window observations in CSR layout.

class ExperimentPanel {
  public:
    struct Data {
        std::vector<std::string> ids;          // empty => synthetic "u<i>" names
        std::vector<int> cohort;               // per unit, 1-based
        std::vector<int> exposure_start;       // per unit, valid once resolved
        std::vector<std::size_t> offsets;      // n_units + 1
        std::vector<int> window;               // per observation, sorted within unit
        std::vector<double> value;             // per observation
        std::vector<std::int64_t> stamp;       // per observation, only while unresolved
        int n_cohorts = 0;
        int k_minus_1 = 0;
        bool resolved = true;
        ImputePolicy policy = ImputePolicy::observed_only;
    };

    explicit ExperimentPanel(Data d) : d_(std::move(d)) {}

    /// Fully dense panel: unit u holds values for windows
    /// exposure_start[u]..k_minus_1, laid out unit-major in `values`.
    static ExperimentPanel dense(std::vector<int> cohort, std::vector<int> exposure_start,
                                 int k_minus_1, std::vector<double> values, int n_cohorts) {
        Data d;
        std::size_t n = cohort.size();
        if (exposure_start.size() != n) throw DataError("dense panel: size mismatch");
        d.offsets.resize(n + 1);
        d.offsets[0] = 0;
        for (std::size_t u = 0; u < n; ++u) {
            if (exposure_start[u] < 1 || exposure_start[u] > k_minus_1) {
                throw DataError("dense panel: exposure_start out of range");
            }
            d.offsets[u + 1] = d.offsets[u] + static_cast<std::size_t>(k_minus_1 - exposure_start[u] + 1);
        }
        if (values.size() != d.offsets[n]) throw DataError("dense panel: value count mismatch");
        d.window.resize(values.size());
        for (std::size_t u = 0; u < n; ++u) {
            std::size_t o = d.offsets[u];
            for (int w = exposure_start[u]; w <= k_minus_1; ++w) d.window[o++] = w;
        }
        d.cohort = std::move(cohort);
        d.exposure_start = std::move(exposure_start);
        d.value = std::move(values);
        d.n_cohorts = n_cohorts;
        d.k_minus_1 = k_minus_1;
        d.resolved = true;
        d.policy = ImputePolicy::zero;
        return ExperimentPanel(std::move(d));
    }

    int n_units() const { return static_cast<int>(d_.cohort.size()); }
    int n_cohorts() const { return d_.n_cohorts; }
    int windows() const { return d_.k_minus_1; }
    bool windows_resolved() const { return d_.resolved; }
    ImputePolicy policy() const { return d_.policy; }
    std::size_t n_observations() const { return d_.value.size(); }

    int cohort_of(int u) const { return d_.cohort[static_cast<std::size_t>(u)]; }
    int exposure_start(int u) const { return d_.exposure_start[static_cast<std::size_t>(u)]; }

    std::span<const int> unit_windows(int u) const {
        return {d_.window.data() + d_.offsets[u], d_.offsets[u + 1] - d_.offsets[u]};
    }
    std::span<const double> unit_values(int u) const {
        return {d_.value.data() + d_.offsets[u], d_.offsets[u + 1] - d_.offsets[u]};
    }
    std::span<const std::int64_t> unit_stamps(int u) const {
        return {d_.stamp.data() + d_.offsets[u], d_.offsets[u + 1] - d_.offsets[u]};
    }

    std::string unit_id(int u) const {
        if (d_.ids.empty()) return "u" + std::to_string(u + 1);
        return d_.ids[static_cast<std::size_t>(u)];
    }

    /// Value at (unit, window), or `missing` when not observed.
    double value_at(int u, int w, double missing = std::numeric_limits<double>::quiet_NaN()) const {
        auto ws = unit_windows(u);
        auto it = std::lower_bound(ws.begin(), ws.end(), w);
        if (it == ws.end() || *it != w) return missing;
        return unit_values(u)[static_cast<std::size_t>(it - ws.begin())];
    }

    std::vector<long> cohort_counts() const {
        std::vector<long> counts(static_cast<std::size_t>(d_.n_cohorts), 0);
        for (int c : d_.cohort) ++counts[static_cast<std::size_t>(c - 1)];
        return counts;
    }

    const Data& data() const { return d_; }

  private:
    Data d_;
};

// ---------------------------------------------------------------------------
// Ingestion.

struct CsvSchema {
    std::string unit_id = "unit_id";
    std::string cohort = "cohort";
    std::string window = "window";
    std::string timestamp = "timestamp";
    std::string value = "value";
    std::string exposure_start = "exposure_start";  // optional override column
};

namespace detail {

inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    int yoe = static_cast<int>(y - era * 400);
    int doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    std::int64_t doe = static_cast<std::int64_t>(yoe) * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

inline bool parse_int_field(std::string_view s, int& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

inline bool parse_double_field(std::string_view s, double& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

/// ISO-8601 date or date-time ("2024-01-15", "2024-01-15T08:30:00Z") to epoch seconds.
inline bool parse_iso8601(std::string_view s, std::int64_t& out) {
    if (s.size() < 10 || s[4] != '-' || s[7] != '-') return false;
    int y, mo, da;
    if (!parse_int_field(s.substr(0, 4), y) || !parse_int_field(s.substr(5, 2), mo) ||
        !parse_int_field(s.substr(8, 2), da)) {
        return false;
    }
    if (mo < 1 || mo > 12 || da < 1 || da > 31) return false;
    std::int64_t sec = days_from_civil(y, mo, da) * 86400;
    if (s.size() == 10) {
        out = sec;
        return true;
    }
    if (s[10] != 'T' && s[10] != ' ') return false;
    std::string_view t = s.substr(11);
    if (!t.empty() && (t.back() == 'Z' || t.back() == 'z')) t.remove_suffix(1);
    if (t.size() < 8 || t[2] != ':' || t[5] != ':') return false;
    int hh, mm, ss;
    if (!parse_int_field(t.substr(0, 2), hh) || !parse_int_field(t.substr(3, 2), mm) ||
        !parse_int_field(t.substr(6, 2), ss)) {
        return false;
    }
    if (hh > 23 || mm > 59 || ss > 60) return false;
    out = sec + hh * 3600 + mm * 60 + ss;
    return true;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
}

}  // namespace detail

/// Incremental panel construction; `build()` checks the panel invariants.
class PanelBuilder {
  public:
    void add(const std::string& unit_id, int cohort, int window, double value) {
        int u = unit_index(unit_id, cohort);
        rows_.push_back({u, window, 0, value});
    }

    void add_timestamped(const std::string& unit_id, int cohort, std::int64_t stamp, double value) {
        int u = unit_index(unit_id, cohort);
        rows_.push_back({u, 0, stamp, value});
        timestamped_ = true;
    }

    void set_exposure_start(const std::string& unit_id, int window) {
        exposure_override_[unit_id] = window;
    }

    bool empty() const { return rows_.empty(); }

    ExperimentPanel build() {
        if (rows_.empty()) throw DataError("empty input: no observations");

        // Canonical unit order (lexicographic by id), so the panel and
        // everything derived from it are independent of input row order.
        std::size_t n = ids_.size();
        std::vector<int> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
        std::sort(order.begin(), order.end(),
                  [this](int a, int b) { return ids_[static_cast<std::size_t>(a)] < ids_[static_cast<std::size_t>(b)]; });
        std::vector<int> rank(n);
        for (std::size_t i = 0; i < n; ++i) rank[static_cast<std::size_t>(order[i])] = static_cast<int>(i);
        for (Row& r : rows_) r.unit = rank[static_cast<std::size_t>(r.unit)];

        ExperimentPanel::Data d;
        d.ids.resize(n);
        d.cohort.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            d.ids[i] = ids_[static_cast<std::size_t>(order[i])];
            d.cohort[i] = cohorts_[static_cast<std::size_t>(order[i])];
        }
        d.exposure_start.assign(n, 0);

        int max_cohort = 0;
        for (int c : d.cohort) max_cohort = std::max(max_cohort, c);
        std::vector<long> seen(static_cast<std::size_t>(max_cohort), 0);
        for (int c : d.cohort) ++seen[static_cast<std::size_t>(c - 1)];
        for (int c = 1; c <= max_cohort; ++c) {
            if (seen[static_cast<std::size_t>(c - 1)] == 0) {
                throw DataError("cohort labels must form a contiguous 1..m set; cohort " +
                                std::to_string(c) + " has no units");
            }
        }
        d.n_cohorts = max_cohort;

        std::stable_sort(rows_.begin(), rows_.end(), [this](const Row& a, const Row& b) {
            if (a.unit != b.unit) return a.unit < b.unit;
            return timestamped_ ? a.stamp < b.stamp : a.window < b.window;
        });

        d.offsets.assign(n + 1, 0);
        for (const Row& r : rows_) ++d.offsets[static_cast<std::size_t>(r.unit) + 1];
        for (std::size_t u = 0; u < n; ++u) d.offsets[u + 1] += d.offsets[u];

        d.value.reserve(rows_.size());
        if (timestamped_) {
            d.stamp.reserve(rows_.size());
            for (const Row& r : rows_) {
                d.stamp.push_back(r.stamp);
                d.value.push_back(r.value);
            }
            d.window.assign(rows_.size(), 0);
            d.resolved = false;
            d.k_minus_1 = 0;
        } else {
            d.window.reserve(rows_.size());
            int max_w = 0;
            for (const Row& r : rows_) {
                d.window.push_back(r.window);
                d.value.push_back(r.value);
                max_w = std::max(max_w, r.window);
            }
            d.k_minus_1 = max_w;
            d.resolved = true;
            for (std::size_t u = 0; u < n; ++u) {
                auto lo = d.offsets[u], hi = d.offsets[u + 1];
                for (std::size_t i = lo + 1; i < hi; ++i) {
                    if (d.window[i] == d.window[i - 1]) {
                        throw DataError("duplicate observation for unit '" + d.ids[u] +
                                        "', window " + std::to_string(d.window[i]) +
                                        "; pre-aggregate to one value per unit per window");
                    }
                }
                d.exposure_start[u] = (hi > lo) ? d.window[lo] : 1;
            }
            for (const auto& [id, w] : exposure_override_) {
                auto it = index_.find(id);
                if (it != index_.end()) {
                    std::size_t u = static_cast<std::size_t>(rank[static_cast<std::size_t>(it->second)]);
                    d.exposure_start[u] = w;
                }
            }
        }
        return ExperimentPanel(std::move(d));
    }

  private:
    struct Row {
        int unit;
        int window;
        std::int64_t stamp;
        double value;
    };

    int unit_index(const std::string& id, int cohort) {
        auto [it, inserted] = index_.try_emplace(id, static_cast<int>(ids_.size()));
        if (inserted) {
            ids_.push_back(id);
            cohorts_.push_back(cohort);
        } else if (cohorts_[static_cast<std::size_t>(it->second)] != cohort) {
            throw DataError("unit '" + id + "' appears in more than one cohort");
        }
        return it->second;
    }

    std::unordered_map<std::string, int> index_;
    std::vector<std::string> ids_;
    std::vector<int> cohorts_;
    std::vector<Row> rows_;
    std::map<std::string, int> exposure_override_;
    bool timestamped_ = false;
};

/// Long-format CSV -> panel. Header row required; `schema` maps column roles
/// to header names. Exactly one of the window / timestamp columns must be
/// present. Errors carry 1-based line numbers.
inline ExperimentPanel ingest_csv(std::istream& in, const CsvSchema& schema = {}) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty input: missing header row");
    auto header = detail::split_csv_line(line);

    auto find_col = [&](const std::string& name) -> int {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return static_cast<int>(i);
        }
        return -1;
    };
    int col_unit = find_col(schema.unit_id);
    int col_cohort = find_col(schema.cohort);
    int col_window = find_col(schema.window);
    int col_stamp = find_col(schema.timestamp);
    int col_value = find_col(schema.value);
    int col_exposure = find_col(schema.exposure_start);

    if (col_unit < 0) throw DataError("header: missing column '" + schema.unit_id + "'");
    if (col_cohort < 0) throw DataError("header: missing column '" + schema.cohort + "'");
    if (col_value < 0) throw DataError("header: missing column '" + schema.value + "'");
    if (col_window < 0 && col_stamp < 0) {
        throw DataError("header: need column '" + schema.window + "' or '" + schema.timestamp + "'");
    }
    bool by_window = col_window >= 0;

    PanelBuilder builder;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view sv = detail::trim(line);
        if (sv.empty()) continue;
        auto fields = detail::split_csv_line(sv);
        auto fail = [&](const std::string& what) -> DataError {
            return DataError("line " + std::to_string(line_no) + ": " + what);
        };
        int need = std::max({col_unit, col_cohort, by_window ? col_window : col_stamp, col_value,
                             col_exposure});
        if (static_cast<int>(fields.size()) <= need) throw fail("too few fields");

        std::string unit(fields[static_cast<std::size_t>(col_unit)]);
        if (unit.empty()) throw fail("empty unit_id");

        int cohort;
        if (!detail::parse_int_field(fields[static_cast<std::size_t>(col_cohort)], cohort) || cohort < 1) {
            throw fail("cohort must be an integer >= 1");
        }
        double value;
        if (!detail::parse_double_field(fields[static_cast<std::size_t>(col_value)], value) ||
            !std::isfinite(value)) {
            throw fail("value must be a finite decimal");
        }

        if (by_window) {
            int window;
            if (!detail::parse_int_field(fields[static_cast<std::size_t>(col_window)], window) ||
                window < 1) {
                throw fail("window must be an integer >= 1");
            }
            builder.add(unit, cohort, window, value);
        } else {
            std::int64_t stamp;
            if (!detail::parse_iso8601(fields[static_cast<std::size_t>(col_stamp)], stamp)) {
                throw fail("timestamp must be ISO-8601 (YYYY-MM-DD or YYYY-MM-DDThh:mm:ssZ)");
            }
            builder.add_timestamped(unit, cohort, stamp, value);
        }
        if (col_exposure >= 0) {
            auto f = fields[static_cast<std::size_t>(col_exposure)];
            if (!f.empty()) {
                int es;
                if (!detail::parse_int_field(f, es) || es < 1) {
                    throw fail("exposure_start must be an integer >= 1");
                }
                builder.set_exposure_start(unit, es);
            }
        }
    }
    return builder.build();
}

inline ExperimentPanel ingest_csv_file(const std::string& path, const CsvSchema& schema = {}) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input file: " + path);
    return ingest_csv(in, schema);
}

// ---------------------------------------------------------------------------
// Window bucketing.

/// Assigns window indexes. Calendar mode counts windows from the experiment
/// start; exposure mode re-indexes each unit from its own first observation
/// so window 1 is the unit's first exposed window. `window_days` applies to
/// timestamped panels.
inline ExperimentPanel bucket_windows(const ExperimentPanel& panel, BucketMode mode,
                                      double window_days = 1.0) {
    const auto& src = panel.data();
    ExperimentPanel::Data d = src;
    std::size_t n = src.cohort.size();

    if (!src.resolved) {
        if (src.stamp.empty()) throw DataError("bucket_windows: timestamps absent");
        if (window_days <= 0) throw DataError("bucket_windows: window length must be positive");
        std::int64_t len = static_cast<std::int64_t>(window_days * 86400.0);
        if (len < 1) throw DataError("bucket_windows: window length too small");
        std::int64_t global_min = *std::min_element(src.stamp.begin(), src.stamp.end());
        for (std::size_t u = 0; u < n; ++u) {
            std::size_t lo = src.offsets[u], hi = src.offsets[u + 1];
            std::int64_t origin = global_min;
            if (mode == BucketMode::exposure) {
                origin = src.stamp[lo];
                for (std::size_t i = lo; i < hi; ++i) origin = std::min(origin, src.stamp[i]);
            }
            for (std::size_t i = lo; i < hi; ++i) {
                d.window[i] = static_cast<int>((src.stamp[i] - origin) / len) + 1;
            }
        }
        d.stamp.clear();
    } else {
        if (mode == BucketMode::calendar) {
            int global_min = src.k_minus_1;
            for (int w : src.window) global_min = std::min(global_min, w);
            for (auto& w : d.window) w -= global_min - 1;
        } else {
            for (std::size_t u = 0; u < n; ++u) {
                std::size_t lo = src.offsets[u], hi = src.offsets[u + 1];
                if (lo == hi) continue;
                int first = src.window[lo];
                for (std::size_t i = lo; i < hi; ++i) first = std::min(first, src.window[i]);
                for (std::size_t i = lo; i < hi; ++i) d.window[i] = src.window[i] - first + 1;
            }
        }
    }

    int k = 0;
    for (std::size_t u = 0; u < n; ++u) {
        std::size_t lo = src.offsets[u], hi = src.offsets[u + 1];
        std::vector<std::size_t> order(hi - lo);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = lo + i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return d.window[a] < d.window[b]; });
        std::vector<int> ws(order.size());
        std::vector<double> vs(order.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            ws[i] = d.window[order[i]];
            vs[i] = src.value[order[i]];
        }
        for (std::size_t i = 1; i < ws.size(); ++i) {
            if (ws[i] == ws[i - 1]) {
                throw DataError("unit '" + panel.unit_id(static_cast<int>(u)) +
                                "' has multiple observations in window " + std::to_string(ws[i]) +
                                "; pre-aggregate to one value per unit per window");
            }
        }
        std::copy(ws.begin(), ws.end(), d.window.begin() + static_cast<std::ptrdiff_t>(lo));
        std::copy(vs.begin(), vs.end(), d.value.begin() + static_cast<std::ptrdiff_t>(lo));
        d.exposure_start[u] = ws.empty() ? 1 : ws.front();
        if (!ws.empty()) k = std::max(k, ws.back());
    }
    d.k_minus_1 = k;
    d.resolved = true;
    return ExperimentPanel(std::move(d));
}

// ---------------------------------------------------------------------------
// Imputation.

/// Zero policy inserts value 0 for every (unit, window) pair with
/// exposure_start <= window <= k-1 and no observation. Windows before a
/// unit's exposure_start are never filled. Observed-only records the policy
/// and leaves the panel sparse.
inline ExperimentPanel impute(const ExperimentPanel& panel, ImputePolicy policy) {
    if (!panel.windows_resolved()) throw DataError("impute: bucket windows first");
    const auto& src = panel.data();
    if (policy == ImputePolicy::observed_only) {
        ExperimentPanel::Data d = src;
        d.policy = ImputePolicy::observed_only;
        return ExperimentPanel(std::move(d));
    }

    std::size_t n = src.cohort.size();
    ExperimentPanel::Data d;
    d.ids = src.ids;
    d.cohort = src.cohort;
    d.exposure_start = src.exposure_start;
    d.n_cohorts = src.n_cohorts;
    d.k_minus_1 = src.k_minus_1;
    d.resolved = true;
    d.policy = ImputePolicy::zero;

    d.offsets.assign(n + 1, 0);
    for (std::size_t u = 0; u < n; ++u) {
        std::size_t before = 0;
        std::size_t lo = src.offsets[u], hi = src.offsets[u + 1];
        for (std::size_t i = lo; i < hi; ++i) {
            if (src.window[i] < src.exposure_start[u]) ++before;
        }
        std::size_t span = static_cast<std::size_t>(src.k_minus_1 - src.exposure_start[u] + 1);
        d.offsets[u + 1] = d.offsets[u] + before + span;
    }
    d.window.resize(d.offsets[n]);
    d.value.resize(d.offsets[n]);

    for (std::size_t u = 0; u < n; ++u) {
        std::size_t lo = src.offsets[u], hi = src.offsets[u + 1];
        std::size_t o = d.offsets[u];
        std::size_t i = lo;
        while (i < hi && src.window[i] < src.exposure_start[u]) {
            d.window[o] = src.window[i];
            d.value[o] = src.value[i];
            ++o;
            ++i;
        }
        for (int w = src.exposure_start[u]; w <= src.k_minus_1; ++w) {
            if (i < hi && src.window[i] == w) {
                d.window[o] = w;
                d.value[o] = src.value[i];
                ++i;
            } else {
                d.window[o] = w;
                d.value[o] = 0.0;
            }
            ++o;
        }
    }
    return ExperimentPanel(std::move(d));
}

// ---------------------------------------------------------------------------
// Cell means.

struct Cell {
    stats::RunningStat acc;
    Arm arm = Arm::control;

    long count() const { return acc.n; }
    double mean() const { return acc.mean; }
    bool degenerate() const { return acc.n < 2; }
    double sample_variance() const { return acc.sample_variance(); }
    /// Variance of the cell mean, s^2 / count.
    double mean_variance() const { return acc.variance_of_mean(); }
};

class CellMeans {
  public:
    CellMeans(int cohorts, int windows)
        : cohorts_(cohorts), windows_(windows),
          cells_(static_cast<std::size_t>(cohorts) * windows) {}

    int cohorts() const { return cohorts_; }
    int windows() const { return windows_; }

    Cell& cell(int cohort, int window) {
        return cells_[static_cast<std::size_t>(cohort - 1) * windows_ + (window - 1)];
    }
    const Cell& cell(int cohort, int window) const {
        return cells_[static_cast<std::size_t>(cohort - 1) * windows_ + (window - 1)];
    }

    /// Mean of a cell an estimator depends on; empty cells error here.
    double require_mean(int cohort, int window) const {
        const Cell& c = cell(cohort, window);
        if (c.count() == 0) {
            throw DataError("no observations for cohort " + std::to_string(cohort) +
                            ", window " + std::to_string(window));
        }
        return c.mean();
    }

    const Cell& require_cell(int cohort, int window) const {
        const Cell& c = cell(cohort, window);
        if (c.count() == 0) {
            throw DataError("no observations for cohort " + std::to_string(cohort) +
                            ", window " + std::to_string(window));
        }
        return c;
    }

  private:
    int cohorts_;
    int windows_;
    std::vector<Cell> cells_;
};

inline CellMeans cell_means(const ExperimentPanel& panel, const CohortSchedule& schedule) {
    if (!panel.windows_resolved()) throw DataError("cell_means: bucket windows first");
    if (panel.windows() > schedule.windows()) {
        throw DataError("panel has " + std::to_string(panel.windows()) +
                        " windows but schedule covers " + std::to_string(schedule.windows()));
    }
    if (panel.n_cohorts() > schedule.cohorts()) {
        throw DataError("panel has " + std::to_string(panel.n_cohorts()) +
                        " cohorts but schedule covers " + std::to_string(schedule.cohorts()));
    }
    CellMeans out(schedule.cohorts(), schedule.windows());
    for (int u = 0; u < panel.n_units(); ++u) {
        int c = panel.cohort_of(u);
        auto ws = panel.unit_windows(u);
        auto vs = panel.unit_values(u);
        for (std::size_t i = 0; i < ws.size(); ++i) {
            Cell& cell = out.cell(c, ws[i]);
            cell.acc.add(vs[i]);
            cell.arm = schedule.arm(c, ws[i]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sample ratio mismatch.

struct SrmResult {
    double statistic = 0.0;
    double p_value = 1.0;
    bool flagged = false;
    int dof = 0;
    std::vector<long> counts;
    std::vector<double> expected;
};

/// Chi-square goodness-of-fit of cohort unit counts against expected ratios.
inline SrmResult srm_check(const ExperimentPanel& panel, const std::vector<double>& expected_ratios) {
    if (static_cast<int>(expected_ratios.size()) != panel.n_cohorts()) {
        throw DataError("srm_check: expected " + std::to_string(panel.n_cohorts()) +
                        " ratios, got " + std::to_string(expected_ratios.size()));
    }
    double ratio_sum = 0.0;
    for (double r : expected_ratios) {
        if (r <= 0.0) throw DataError("srm_check: ratios must be positive");
        ratio_sum += r;
    }
    if (std::fabs(ratio_sum - 1.0) > 1e-9) throw DataError("srm_check: ratios must sum to 1");

    SrmResult res;
    res.counts = panel.cohort_counts();
    long total = 0;
    for (long c : res.counts) total += c;
    res.expected.resize(res.counts.size());
    for (std::size_t i = 0; i < res.counts.size(); ++i) {
        res.expected[i] = expected_ratios[i] * static_cast<double>(total);
        double diff = static_cast<double>(res.counts[i]) - res.expected[i];
        res.statistic += diff * diff / res.expected[i];
    }
    res.dof = static_cast<int>(res.counts.size()) - 1;
    res.p_value = (res.dof >= 1) ? stats::chi_square_sf(res.statistic, res.dof) : 1.0;
    res.flagged = res.p_value < config::srm_p_threshold;
    return res;
}

}  // namespace learnfx
