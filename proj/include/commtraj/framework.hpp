#pragma once

#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "commtraj/types.hpp"

namespace commtraj {

/// Window W_i over 1-based post indices [first, last].
struct Window {
  std::size_t index = 0;  // 1-based
  std::size_t first = 0;
  std::size_t last = 0;

  std::size_t size() const { return last - first + 1; }
  bool operator==(const Window&) const = default;
};

/// floor(T/w) consecutive windows of exactly w posts; the remainder is unused.
std::vector<Window> windows(std::size_t post_count, std::size_t window_size);

/// Stage (1-based) of each window: stage s holds windows in
/// (floor((s-1)N/S), floor(sN/S)].
std::vector<std::size_t> stages(std::size_t window_count, std::size_t stage_count);

/// The events of window `w` within `events`.
inline std::span<const PostEvent> window_events(std::span<const PostEvent> events, const Window& w) {
  return events.subspan(w.first - 1, w.size());
}

struct FixedPrefix {
  std::size_t prefix_len = 50;
};

struct FullLife {
  std::size_t stage_count = 5;
};

struct WindowSpec {
  std::size_t window_size = 10;
  std::variant<FixedPrefix, FullLife> view = FixedPrefix{};

  /// Throws std::invalid_argument when the invariants fail.
  void validate() const;
};

/// Value of a metric for one window or stage; nullopt means missing.
using MaybeValue = std::optional<double>;

struct SeriesPoint {
  std::size_t x = 0;  // window or stage index, 1-based
  MaybeValue value;
  bool operator==(const SeriesPoint&) const = default;
};

struct WindowSeries {
  std::string user_id;
  std::vector<SeriesPoint> values;
};

struct StageSeries {
  std::string user_id;
  std::vector<SeriesPoint> values;
};

/// Window-level F(W_i). Receives the whole trajectory and the window so that
/// functions may look outside the window (e.g. the gap to the previous post).
using WindowFunction = std::function<MaybeValue(std::span<const PostEvent> trajectory, const Window& w)>;
/// Index-level f(t) with 1-based t. Undefined posts return nullopt and are
/// skipped when averaging.
using IndexFunction = std::function<MaybeValue(std::span<const PostEvent> trajectory, std::size_t t)>;

/// Lifts f to the window mean over its defined indices.
WindowFunction window_mean(IndexFunction f);

/// Adapts a function of the window's own events.
WindowFunction on_window_events(std::function<MaybeValue(std::span<const PostEvent>)> f);

/// Fixed-prefix evaluates the windows of the first min(T, prefix_len) posts;
/// full-life evaluates all floor(T/w) windows.
WindowSeries eval_window_function(const UserTrajectory& trajectory, const WindowFunction& f, const WindowSpec& spec);

/// Per-stage mean of the non-missing window values.
StageSeries eval_stage_view(const WindowSeries& series, std::size_t stage_count);

/// Population aggregate at one x for one group.
struct CurvePoint {
  std::string group;
  std::size_t x = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

/// Per-group, per-x mean and standard error (sample sd / sqrt(n); 0 when
/// n = 1). Users are reduced in ascending user-id order. Users without a
/// group are skipped; groups with no defined values emit no rows.
std::vector<CurvePoint> population_curve(const std::map<std::string, std::vector<SeriesPoint>>& series_by_user,
                                         const std::map<std::string, std::string>& group_by_user);

/// Shortest round-trip decimal rendering, used by every CSV writer.
std::string format_double(double v);

void write_series_header(std::ostream& out);
void write_series_rows(std::ostream& out, const std::string& user, std::string_view x_kind, std::string_view metric,
                       std::span<const SeriesPoint> values);
void write_curve_header(std::ostream& out);
void write_curve_rows(std::ostream& out, std::string_view metric, std::span<const CurvePoint> curve);

}  // namespace commtraj
