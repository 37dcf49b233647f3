#include "commtraj/framework.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace commtraj {

std::vector<Window> windows(std::size_t post_count, std::size_t window_size) {
  if (window_size == 0) throw std::invalid_argument("window size must be >= 1");
  const std::size_t n = post_count / window_size;
  std::vector<Window> out;
  out.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) out.push_back({i, (i - 1) * window_size + 1, i * window_size});
  return out;
}

std::vector<std::size_t> stages(std::size_t window_count, std::size_t stage_count) {
  if (stage_count == 0) throw std::invalid_argument("stage count must be >= 1");
  std::vector<std::size_t> out(window_count);
  for (std::size_t s = 1; s <= stage_count; ++s) {
    const std::size_t lo = (s - 1) * window_count / stage_count;
    const std::size_t hi = s * window_count / stage_count;
    for (std::size_t i = lo + 1; i <= hi; ++i) out[i - 1] = s;
  }
  return out;
}

void WindowSpec::validate() const {
  if (window_size == 0) throw std::invalid_argument("window size must be >= 1");
  if (const auto* p = std::get_if<FixedPrefix>(&view)) {
    if (p->prefix_len == 0 || p->prefix_len % window_size != 0)
      throw std::invalid_argument("prefix length must be a positive multiple of the window size");
  } else if (std::get<FullLife>(view).stage_count == 0) {
    throw std::invalid_argument("stage count must be >= 1");
  }
}

WindowFunction window_mean(IndexFunction f) {
  return [f = std::move(f)](std::span<const PostEvent> trajectory, const Window& w) -> MaybeValue {
    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t t = w.first; t <= w.last; ++t) {
      if (auto v = f(trajectory, t)) {
        sum += *v;
        ++defined;
      }
    }
    if (defined == 0) return std::nullopt;
    return sum / static_cast<double>(defined);
  };
}

WindowFunction on_window_events(std::function<MaybeValue(std::span<const PostEvent>)> f) {
  return [f = std::move(f)](std::span<const PostEvent> trajectory, const Window& w) {
    return f(window_events(trajectory, w));
  };
}

WindowSeries eval_window_function(const UserTrajectory& trajectory, const WindowFunction& f, const WindowSpec& spec) {
  spec.validate();
  std::size_t usable = trajectory.size();
  if (const auto* p = std::get_if<FixedPrefix>(&spec.view)) usable = std::min(usable, p->prefix_len);
  WindowSeries out{trajectory.user_id, {}};
  const std::span<const PostEvent> events(trajectory.events);
  for (const auto& w : windows(usable, spec.window_size)) out.values.push_back({w.index, f(events, w)});
  return out;
}

StageSeries eval_stage_view(const WindowSeries& series, std::size_t stage_count) {
  const auto assignment = stages(series.values.size(), stage_count);
  std::vector<double> sum(stage_count, 0.0);
  std::vector<std::size_t> n(stage_count, 0);
  for (std::size_t i = 0; i < series.values.size(); ++i) {
    if (const auto& v = series.values[i].value) {
      sum[assignment[i] - 1] += *v;
      ++n[assignment[i] - 1];
    }
  }
  StageSeries out{series.user_id, {}};
  for (std::size_t s = 0; s < stage_count; ++s) {
    out.values.push_back({s + 1, n[s] ? MaybeValue(sum[s] / static_cast<double>(n[s])) : std::nullopt});
  }
  return out;
}

std::vector<CurvePoint> population_curve(const std::map<std::string, std::vector<SeriesPoint>>& series_by_user,
                                         const std::map<std::string, std::string>& group_by_user) {
  // group -> x -> values in user order
  std::map<std::string, std::map<std::size_t, std::vector<double>>> buckets;
  for (const auto& [user, series] : series_by_user) {
    auto g = group_by_user.find(user);
    if (g == group_by_user.end()) continue;
    for (const auto& p : series)
      if (p.value) buckets[g->second][p.x].push_back(*p.value);
  }
  std::vector<CurvePoint> out;
  for (const auto& [group, by_x] : buckets) {
    for (const auto& [x, values] : by_x) {
      const double n = static_cast<double>(values.size());
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= n;
      double se = 0.0;
      if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - mean) * (v - mean);
        se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
      }
      out.push_back({group, x, mean, se, values.size()});
    }
  }
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_series_header(std::ostream& out) { out << "user,x_kind,x,metric,value,missing_flag\n"; }

void write_series_rows(std::ostream& out, const std::string& user, std::string_view x_kind, std::string_view metric,
                       std::span<const SeriesPoint> values) {
  for (const auto& p : values) {
    out << user << ',' << x_kind << ',' << p.x << ',' << metric << ',';
    if (p.value) out << format_double(*p.value) << ",0\n";
    else out << ",1\n";
  }
}

void write_curve_header(std::ostream& out) { out << "group,x,metric,mean,stderr,n\n"; }

void write_curve_rows(std::ostream& out, std::string_view metric, std::span<const CurvePoint> curve) {
  for (const auto& p : curve) {
    out << p.group << ',' << p.x << ',' << metric << ',' << format_double(p.mean) << ','
        << format_double(p.stderr_) << ',' << p.n << '\n';
  }
}

}  // namespace commtraj
