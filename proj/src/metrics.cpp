#include "artcal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "artcal/csv.hpp"
#include "json.hpp"

namespace artcal {

namespace {

bool is_entry(const NetworkGraph& g, std::size_t l) { return l != kNone && g.link(l).kind == LinkKind::entry; }

std::size_t movement_of(const NetworkGraph& g, const SimEvent& e) {
  for (auto mv : g.movements_from(e.link_from))
    if (g.movement_to(mv) == e.link_to) return mv;
  throw InputError("event log names movement " + g.link(e.link_from).id + " -> " + g.link(e.link_to).id +
                   ", which does not exist");
}

std::size_t bin_count(double end, double bin) {
  if (!(end > 0.0)) return 0;
  return static_cast<std::size_t>(std::ceil(end / bin - 1e-12));
}

}  // namespace

// ---------------------------------------------------------------------------

void WindowIntegral::advance(double t) {
  const double a = std::max(last, lo), b = std::min(t, hi);
  if (b > a) area += value * (b - a);
  last = t;
}

void BinnedIntegral::advance(double t) {
  while (last_ < t) {
    auto b = static_cast<std::size_t>(std::floor(last_ / bin_));
    double edge = static_cast<double>(b + 1) * bin_;
    if (edge <= last_) edge = static_cast<double>(++b + 1) * bin_;
    const double step = std::min(t, edge);
    if (area_.size() <= b) area_.resize(b + 1, 0.0);
    area_[b] += value_ * (step - last_);
    last_ = step;
  }
}

void BinnedIntegral::set(double t, double value) {
  advance(t);
  value_ = value;
}

std::vector<double> BinnedIntegral::means(double end) {
  advance(end);
  const auto n = bin_count(end, bin_);
  area_.resize(std::max(area_.size(), n), 0.0);
  std::vector<double> out(n);
  for (std::size_t b = 0; b < n; ++b) {
    const double width = std::min(bin_, end - static_cast<double>(b) * bin_);
    out[b] = width > 0.0 ? area_[b] / width : 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trips

void TripCollector::add(const SimEvent& e) {
  const auto& g = *g_;
  switch (e.kind) {
    case EventKind::external_arrival: {
      TripRecord r;
      r.vehicle = e.vehicle;
      r.entry_link = e.link_to;
      r.arrival_s = e.time;
      open_[e.vehicle] = r;
      break;
    }
    case EventKind::enter_link: {
      auto it = open_.find(e.vehicle);
      if (it == open_.end()) break;
      auto& r = it->second;
      if (e.link_from == kNone) r.entered_s = e.time;
      r.distance_mi += g.link(e.link_to).length_mi;
      if (g.link(e.link_to).kind == LinkKind::internal) r.touches_internal = true;
      break;
    }
    case EventKind::cross_intersection: {
      auto it = open_.find(e.vehicle);
      if (it != open_.end() && is_entry(g, e.link_from)) it->second.internal_s = e.time;
      break;
    }
    case EventKind::exit_network: {
      auto it = open_.find(e.vehicle);
      if (it == open_.end()) break;
      it->second.exit_link = e.link_from;
      it->second.exit_s = e.time;
      done_.push_back(it->second);
      open_.erase(it);
      break;
    }
    default: break;
  }
}

std::vector<TripRecord> collect_trips(const NetworkGraph& g, std::span<const SimEvent> log) {
  TripCollector c(g);
  for (const auto& e : log) c.add(e);
  return c.trips();
}

RouteTravelTimes route_travel_times(std::span<const TripRecord> trips, std::size_t entry_link, std::size_t exit_link) {
  RouteTravelTimes r;
  for (const auto& t : trips)
    if (t.entry_link == entry_link && t.exit_link == exit_link) r.samples.emplace_back(t.entered_s, t.travel_time_s());
  if (r.samples.empty()) return r;
  const double n = static_cast<double>(r.samples.size());
  for (const auto& s : r.samples) r.mean += s.second / n;
  double ss = 0.0;
  for (const auto& s : r.samples) ss += (s.second - r.mean) * (s.second - r.mean);
  r.stddev = std::sqrt(ss / n);
  r.flagged = r.samples.size() < 2;
  std::size_t inside = 0;
  for (const auto& s : r.samples)
    if (std::abs(s.second - r.mean) <= 2.0 * r.stddev + 1e-12) ++inside;
  r.within_two_sigma = static_cast<double>(inside) / n;
  return r;
}

VmtVht vmt_vht(std::span<const TripRecord> trips, double duration_s) {
  if (!(duration_s > 0.0)) throw ComputationError("VMT needs a positive duration");
  std::vector<const TripRecord*> used;
  for (const auto& t : trips)
    if (t.touches_internal && t.travel_time_s() > 0.0) used.push_back(&t);
  if (used.empty()) throw ComputationError("no trips through the network to compute VMT from");

  VmtVht r;
  r.trips = used.size();
  const double n = static_cast<double>(used.size()), hours = duration_s / 3600.0;
  double miles = 0.0, seconds = 0.0, speeds = 0.0;
  for (const auto* t : used) {
    miles += t->distance_mi;
    seconds += t->travel_time_s();
    speeds += t->speed_mph();
  }
  r.vmt_per_hour = miles / hours;
  r.vht_per_hour = seconds / 3600.0 / hours;
  r.speed_mph = r.vmt_per_hour / r.vht_per_hour;
  r.mean_distance_mi = miles / n;
  r.mean_time_s = seconds / n;
  r.mean_speed_mph = speeds / n;

  double svv = 0.0, stt = 0.0, svt = 0.0;
  for (const auto* t : used) {
    const double dv = t->speed_mph() - r.mean_speed_mph, dt = t->travel_time_s() - r.mean_time_s;
    svv += dv * dv;
    stt += dt * dt;
    svt += dv * dt;
  }
  const double scale = std::sqrt(svv * stt);
  if (scale > 1e-12 * std::max(1.0, svv + stt)) r.correlation = svt / scale;
  return r;
}

void LinkEntryCounter::add(const SimEvent& e) {
  if (e.kind == EventKind::enter_link) ++entries_[e.link_to];
}

double LinkEntryCounter::vehicle_miles() const {
  double miles = 0.0;
  for (std::size_t l = 0; l < entries_.size(); ++l)
    miles += static_cast<double>(entries_[l]) * g_->link(l).length_mi;
  return miles;
}

// ---------------------------------------------------------------------------
// Excess green

double ExcessGreen::cdf_at(double e) const {
  double f = 0.0;
  for (const auto& [x, fx] : cdf)
    if (x <= e) f = fx;
  return f;
}

ExcessGreenMeter::ExcessGreenMeter(const NetworkGraph& g)
    : g_(&g),
      green_(g.num_movements(), 0),
      signalized_(g.num_movements(), 0),
      queue_(g.num_movements(), 0),
      last_(g.num_movements(), 0.0),
      acc_(g.num_movements()),
      group_time_(g.num_nodes(), std::nan("")) {
  for (std::size_t mv = 0; mv < g.num_movements(); ++mv) {
    acc_[mv].movement = mv;
    const auto node = g.movement_node(mv);
    signalized_[mv] = node != kNone && g.plan_for(node) != nullptr;
  }
}

void ExcessGreenMeter::advance(std::size_t mv, double t) {
  const double dt = t - last_[mv];
  if (green_[mv] && dt > 0.0) {
    acc_[mv].actuated_s += dt;
    if (queue_[mv] == 0) acc_[mv].empty_s += dt;
  }
  last_[mv] = t;
}

void ExcessGreenMeter::add(const SimEvent& e) {
  const auto& g = *g_;
  switch (e.kind) {
    case EventKind::phase_change: {
      if (!(group_time_[e.node] == e.time)) {
        group_time_[e.node] = e.time;
        for (auto l : g.incoming(e.node))
          for (auto mv : g.movements_from(l)) {
            advance(mv, e.time);
            green_[mv] = 0;
          }
      }
      if (e.link_from != kNone) {
        const auto mv = movement_of(g, e);
        advance(mv, e.time);
        green_[mv] = 1;
      }
      break;
    }
    case EventKind::join_queue:
    case EventKind::cross_intersection: {
      const auto mv = movement_of(g, e);
      advance(mv, e.time);
      queue_[mv] += e.kind == EventKind::join_queue ? 1 : -1;
      break;
    }
    default: break;
  }
}

ExcessGreen ExcessGreenMeter::finish(double end_s) {
  ExcessGreen out;
  std::vector<double> values;
  for (std::size_t mv = 0; mv < acc_.size(); ++mv) {
    if (!signalized_[mv]) continue;
    advance(mv, end_s);
    out.phases.push_back(acc_[mv]);
    if (auto e = acc_[mv].excess())
      values.push_back(*e);
    else
      out.never_actuated.push_back(mv);
  }
  std::sort(values.begin(), values.end());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double f = static_cast<double>(i + 1) / static_cast<double>(values.size());
    if (!out.cdf.empty() && out.cdf.back().first == values[i])
      out.cdf.back().second = f;
    else
      out.cdf.emplace_back(values[i], f);
  }
  return out;
}

ExcessGreen excess_green(const NetworkGraph& g, std::span<const SimEvent> log, double end_s) {
  ExcessGreenMeter m(g);
  for (const auto& e : log) m.add(e);
  return m.finish(end_s);
}

// ---------------------------------------------------------------------------
// Macroscopic queuing quantities

MacroMeter::MacroMeter(const NetworkGraph& g, MacroOptions options)
    : g_(&g), opt_(options), window_end_(options.window_end_s.value_or(kInfinity)) {
  if (!(opt_.bin_s > 0.0)) throw InputError("bin width must be positive");
  w_.lo = n_.lo = opt_.window_start_s;
  w_.hi = n_.hi = window_end_;
}

void MacroMeter::close_bins(double t) {
  const double bin = opt_.bin_s;
  while (static_cast<double>(bins_.size() + 1) * bin <= t) {
    MacroBin b;
    b.start_s = static_cast<double>(bins_.size()) * bin;
    b.e_vph = static_cast<double>(bin_e_) * 3600.0 / bin;
    b.a_vph = static_cast<double>(bin_a_) * 3600.0 / bin;
    b.d_vph = static_cast<double>(bin_d_) * 3600.0 / bin;
    b.cum_e = cum_e_;
    b.cum_a = cum_a_;
    b.cum_d = cum_d_;
    b.w = cum_e_ - cum_a_;
    b.n = cum_a_ - cum_d_;
    b.n_from_occupancy = inside_;
    bins_.push_back(b);
    bin_e_ = bin_a_ = bin_d_ = 0;
  }
}

MacroSeries macro_series(const NetworkGraph& g, std::span<const SimEvent> log, const MacroOptions& options,
                         double end_s) {
  MacroMeter m(g, options);
  for (const auto& e : log) m.add(e);
  return m.finish(end_s);
}

void MacroMeter::add(const SimEvent& e) {
  const auto& g = *g_;
  close_bins(e.time);
  auto in_window = [&](double t) { return t >= opt_.window_start_s && t < window_end_; };
  switch (e.kind) {
    case EventKind::external_arrival:
      ++cum_e_;
      ++bin_e_;
      arrived_[e.vehicle] = e.time;
      if (in_window(e.time)) ++window_arrivals_;
      break;
    case EventKind::cross_intersection:
      if (!is_entry(g, e.link_from)) {
        --inside_;
        break;
      }
      ++cum_a_;
      ++bin_a_;
      if (auto it = arrived_.find(e.vehicle); it != arrived_.end()) {
        if (in_window(it->second)) {
          wait_sum_ += e.time - it->second;
          ++waits_;
        }
        arrived_.erase(it);
      }
      internal_[e.vehicle] = e.time;
      break;
    case EventKind::enter_link:
      if (!is_entry(g, e.link_to)) ++inside_;
      break;
    case EventKind::exit_network:
      ++cum_d_;
      ++bin_d_;
      --inside_;
      if (auto it = internal_.find(e.vehicle); it != internal_.end()) {
        if (in_window(it->second)) {
          sojourn_sum_ += e.time - it->second;
          ++sojourns_;
        }
        internal_.erase(it);
      }
      break;
    default: return;
  }
  w_.set(e.time, static_cast<double>(cum_e_ - cum_a_));
  n_.set(e.time, static_cast<double>(cum_a_ - cum_d_));
}

MacroSeries MacroMeter::finish(double end_s) {
  MacroSeries out;
  out.bin_s = opt_.bin_s;
  close_bins(end_s);
  if (static_cast<double>(bins_.size()) * opt_.bin_s < end_s - 1e-9) {
    // trailing partial bin
    const double width = end_s - static_cast<double>(bins_.size()) * opt_.bin_s;
    MacroBin b;
    b.start_s = static_cast<double>(bins_.size()) * opt_.bin_s;
    b.e_vph = static_cast<double>(bin_e_) * 3600.0 / width;
    b.a_vph = static_cast<double>(bin_a_) * 3600.0 / width;
    b.d_vph = static_cast<double>(bin_d_) * 3600.0 / width;
    b.cum_e = cum_e_;
    b.cum_a = cum_a_;
    b.cum_d = cum_d_;
    b.w = cum_e_ - cum_a_;
    b.n = cum_a_ - cum_d_;
    b.n_from_occupancy = inside_;
    bins_.push_back(b);
  }
  out.bins = bins_;

  auto& lr = out.little;
  lr.window_start_s = opt_.window_start_s;
  lr.window_end_s = std::min(window_end_, end_s);
  const double length = lr.window_end_s - lr.window_start_s;
  if (!(length > 0.0)) throw ComputationError("Little's law window is empty");

  w_.advance(end_s);
  n_.advance(end_s);
  lr.w_mean = w_.area / length;
  lr.n_mean = n_.area / length;
  lr.lambda_vph = static_cast<double>(window_arrivals_) / (length / 3600.0);
  lr.vehicles = window_arrivals_;
  lr.entry_wait_s = waits_ ? wait_sum_ / static_cast<double>(waits_) : 0.0;
  lr.sojourn_s = sojourns_ ? sojourn_sum_ / static_cast<double>(sojourns_) : 0.0;
  const double lambda_s = lr.lambda_vph / 3600.0;
  auto rel = [](double observed, double predicted) -> std::optional<double> {
    if (!(observed > 0.0)) return std::nullopt;
    return std::abs(observed - predicted) / observed;
  };
  if (window_arrivals_ > 0) {
    lr.w_error = rel(lr.w_mean, lr.entry_wait_s * lambda_s);
    lr.n_error = rel(lr.n_mean, lr.sojourn_s * lambda_s);
    lr.total_error = rel(lr.w_mean + lr.n_mean, (lr.entry_wait_s + lr.sojourn_s) * lambda_s);
  }
  return out;
}

std::vector<StepSummary> step_summaries(const NetworkGraph& g, std::span<const SimEvent> log,
                                        std::span<const double> edges) {
  if (edges.size() < 2) throw InputError("step summaries need at least two edges");
  std::vector<StepSummary> out(edges.size() - 1);
  std::vector<WindowIntegral> w(out.size()), n(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].start_s = edges[i];
    out[i].end_s = edges[i + 1];
    w[i].lo = n[i].lo = edges[i];
    w[i].hi = n[i].hi = edges[i + 1];
  }
  std::vector<std::int64_t> e(out.size(), 0), a(out.size(), 0), d(out.size(), 0);
  std::int64_t cum_e = 0, cum_a = 0, cum_d = 0;
  std::size_t step = 0;
  auto close_until = [&](double t) {
    while (step < out.size() && t >= edges[step + 1]) {
      out[step].end_w = cum_e - cum_a;
      out[step].end_n = cum_a - cum_d;
      ++step;
    }
  };
  for (const auto& ev : log) {
    close_until(ev.time);
    if (step == out.size()) break;
    const bool counted = ev.time >= edges.front();
    if (ev.kind == EventKind::external_arrival) {
      ++cum_e;
      if (counted) ++e[step];
    } else if (ev.kind == EventKind::cross_intersection && is_entry(g, ev.link_from)) {
      ++cum_a;
      if (counted) ++a[step];
    } else if (ev.kind == EventKind::exit_network) {
      ++cum_d;
      if (counted) ++d[step];
    } else {
      continue;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      w[i].set(ev.time, static_cast<double>(cum_e - cum_a));
      n[i].set(ev.time, static_cast<double>(cum_a - cum_d));
    }
  }
  close_until(edges.back());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double len = edges[i + 1] - edges[i];
    w[i].advance(edges.back());
    n[i].advance(edges.back());
    out[i].mean_w = w[i].area / len;
    out[i].mean_n = n[i].area / len;
    out[i].e_vph = static_cast<double>(e[i]) * 3600.0 / len;
    out[i].a_vph = static_cast<double>(a[i]) * 3600.0 / len;
    out[i].d_vph = static_cast<double>(d[i]) * 3600.0 / len;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Queues and MFD

void QueueMeter::add(const SimEvent& e) {
  switch (e.kind) {
    case EventKind::join_queue:
    case EventKind::external_arrival: ++count_; break;
    case EventKind::cross_intersection: --count_; break;
    case EventKind::enter_link:
      if (e.link_from == kNone) --count_;
      break;
    default: return;
  }
  total_.set(e.time, static_cast<double>(count_));
}

QueueSeries QueueMeter::finish(double end_s) { return {bin_, total_.means(end_s)}; }

QueueSeries queue_series(const NetworkGraph& g, std::span<const SimEvent> log, double bin_s, double end_s) {
  QueueMeter m(g, bin_s);
  for (const auto& e : log) m.add(e);
  return m.finish(end_s);
}

Trend trend(std::span<const double> y, double bin_s) {
  const std::size_t n = y.size();
  if (n < 3) throw ComputationError("a trend needs at least three points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += (static_cast<double>(i) + 0.5) * bin_s;
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = (static_cast<double>(i) + 0.5) * bin_s - mx;
    sxx += dx * dx;
    sxy += dx * (y[i] - my);
  }
  Trend t;
  t.slope = sxy / sxx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double fit = my + t.slope * ((static_cast<double>(i) + 0.5) * bin_s - mx);
    ssr += (y[i] - fit) * (y[i] - fit);
  }
  t.std_error = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
  return t;
}

MfdMeter::MfdMeter(const NetworkGraph& g, std::vector<std::size_t> links, double bin_s)
    : g_(&g), bin_(bin_s), links_(std::move(links)), slot_(g.num_links(), kNone) {
  if (!(bin_s > 0.0)) throw InputError("bin width must be positive");
  if (links_.empty())
    for (std::size_t l = 0; l < g.num_links(); ++l)
      if (g.link(l).kind == LinkKind::internal) links_.push_back(l);
  if (links_.empty()) throw ComputationError("MFD needs at least one sampled link");
  for (std::size_t i = 0; i < links_.size(); ++i) slot_.at(links_[i]) = i;
  occ_.assign(links_.size(), 0);
  integ_.assign(links_.size(), BinnedIntegral(bin_s));
  departures_.resize(links_.size());
}

void MfdMeter::add(const SimEvent& e) {
  auto change = [&](std::size_t l, int delta) {
    if (l == kNone || slot_[l] == kNone) return;
    const auto i = slot_[l];
    occ_[i] += delta;
    integ_[i].set(e.time, static_cast<double>(occ_[i]));
    if (delta < 0) {
      const auto b = static_cast<std::size_t>(std::floor(e.time / bin_));
      if (departures_[i].size() <= b) departures_[i].resize(b + 1, 0);
      ++departures_[i][b];
    }
  };
  switch (e.kind) {
    case EventKind::enter_link: change(e.link_to, +1); break;
    case EventKind::cross_intersection:
    case EventKind::exit_network: change(e.link_from, -1); break;
    default: break;
  }
}

std::vector<MfdPoint> MfdMeter::finish(double end_s) {
  const auto n = bin_count(end_s, bin_);
  std::vector<MfdPoint> out(n);
  double weight = 0.0;
  for (auto l : links_) weight += g_->link(l).length_mi * std::max(1, g_->link(l).lanes);
  for (std::size_t i = 0; i < links_.size(); ++i) {
    const auto& link = g_->link(links_[i]);
    const double w = link.length_mi * std::max(1, link.lanes) / weight;
    const auto occ = integ_[i].means(end_s);
    for (std::size_t b = 0; b < n; ++b) {
      const double width = std::min(bin_, end_s - static_cast<double>(b) * bin_);
      const double dep = b < departures_[i].size() ? static_cast<double>(departures_[i][b]) : 0.0;
      out[b].start_s = static_cast<double>(b) * bin_;
      out[b].flow_vph += w * dep * 3600.0 / width;
      out[b].occupancy += w * occ[b] / link.storage_capacity;
    }
  }
  return out;
}

std::vector<MfdPoint> mfd_aggregate(const NetworkGraph& g, std::span<const SimEvent> log,
                                    std::vector<std::size_t> links, double bin_s, double end_s) {
  MfdMeter m(g, std::move(links), bin_s);
  for (const auto& e : log) m.add(e);
  return m.finish(end_s);
}

// ---------------------------------------------------------------------------

LogAnalysis::LogAnalysis(const NetworkGraph& g, MetricsOptions options)
    : g_(&g),
      opt_(options),
      trips_(g),
      links_(g),
      excess_(g),
      macro_(g, options.macro),
      queues_(g, options.queue_bin_s),
      mfd_(g, options.mfd_links, options.mfd_bin_s) {}

void LogAnalysis::add(const SimEvent& e) {
  if (e.time < last_time_) throw InputError("event log is not time ordered at t = " + format_number(e.time));
  last_time_ = e.time;
  trips_.add(e);
  links_.add(e);
  excess_.add(e);
  macro_.add(e);
  queues_.add(e);
  mfd_.add(e);
}

MetricsReport LogAnalysis::finish(std::optional<double> end_s) {
  MetricsReport r;
  const double end = std::max(end_s.value_or(last_time_), last_time_);
  r.duration_s = end;
  r.trips = trips_.trips();

  auto pairs = opt_.routes;
  if (pairs.empty()) {
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& t : r.trips) seen.emplace(t.entry_link, t.exit_link);
    pairs.assign(seen.begin(), seen.end());
  }
  for (const auto& p : pairs) r.routes.emplace_back(p, route_travel_times(r.trips, p.first, p.second));

  if (end > 0.0) {
    try {
      r.vmt = vmt_vht(r.trips, end);
    } catch (const ComputationError&) {
      r.vmt.reset();
    }
    r.link_vmt_per_hour = links_.vehicle_miles() / (end / 3600.0);
  }
  r.excess = excess_.finish(end);
  r.macro = macro_.finish(end);
  r.queues = queues_.finish(end);
  r.mfd = mfd_.finish(end);
  return r;
}

// ---------------------------------------------------------------------------
// Output

namespace {

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
nlohmann::json number(const std::optional<double>& v) { return v ? number(*v) : nlohmann::json(nullptr); }

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw InputError("cannot write " + p.string());
  return os;
}

}  // namespace

std::string metrics_summary_json(const NetworkGraph& g, const MetricsReport& r) {
  using nlohmann::json;
  json doc;
  doc["duration_s"] = r.duration_s;
  doc["trips"] = r.trips.size();
  if (r.vmt) {
    const auto& v = *r.vmt;
    doc["vmt"] = {{"trips", v.trips},
                  {"vmt_per_hour", number(v.vmt_per_hour)},
                  {"vht_per_hour", number(v.vht_per_hour)},
                  {"speed_mph", number(v.speed_mph)},
                  {"mean_distance_mi", number(v.mean_distance_mi)},
                  {"mean_time_s", number(v.mean_time_s)},
                  {"mean_speed_mph", number(v.mean_speed_mph)},
                  {"correlation", number(v.correlation)}};
  } else {
    doc["vmt"] = nullptr;
  }
  doc["link_vmt_per_hour"] = number(r.link_vmt_per_hour);

  json routes = json::array();
  for (const auto& [p, rt] : r.routes)
    routes.push_back({{"entry", g.link(p.first).id},
                      {"exit", g.link(p.second).id},
                      {"samples", rt.samples.size()},
                      {"mean_s", number(rt.mean)},
                      {"stddev_s", number(rt.stddev)},
                      {"within_two_sigma", number(rt.within_two_sigma)},
                      {"flagged", rt.flagged}});
  doc["routes"] = routes;

  json never = json::array();
  for (auto mv : r.excess.never_actuated)
    never.push_back({{"from", g.movement(mv).from_link}, {"to", g.movement(mv).to_link}});
  double mean_e = 0.0;
  std::size_t defined = 0;
  for (const auto& p : r.excess.phases)
    if (auto e = p.excess()) {
      mean_e += *e;
      ++defined;
    }
  doc["excess_green"] = {{"phases", defined},
                         {"mean", defined ? number(mean_e / static_cast<double>(defined)) : json(nullptr)},
                         {"never_actuated", never}};

  const auto& lr = r.macro.little;
  doc["little"] = {{"window_start_s", lr.window_start_s},
                   {"window_end_s", lr.window_end_s},
                   {"lambda_vph", number(lr.lambda_vph)},
                   {"w", number(lr.w_mean)},
                   {"n", number(lr.n_mean)},
                   {"E_s", number(lr.entry_wait_s)},
                   {"T_s", number(lr.sojourn_s)},
                   {"w_error", number(lr.w_error)},
                   {"n_error", number(lr.n_error)},
                   {"total_error", number(lr.total_error)}};

  double mean_q = 0.0;
  for (double q : r.queues.mean_total) mean_q += q;
  if (!r.queues.mean_total.empty()) mean_q /= static_cast<double>(r.queues.mean_total.size());
  json queue = {{"bin_s", r.queues.bin_s}, {"mean_total", number(mean_q)}};
  if (r.queues.mean_total.size() >= 3) {
    const auto t = trend(r.queues.mean_total, r.queues.bin_s);
    queue["slope_per_hour"] = number(t.slope * 3600.0);
    queue["slope_std_error_per_hour"] = number(t.std_error * 3600.0);
  }
  doc["queue"] = queue;
  doc["mfd_points"] = r.mfd.size();
  return doc.dump(2) + "\n";
}

void write_metrics(const std::string& dir, const NetworkGraph& g, const MetricsReport& r) {
  namespace fs = std::filesystem;
  const fs::path out(dir);
  fs::create_directories(out);

  auto link = [&](std::size_t l) { return l == kNone ? std::string() : g.link(l).id; };
  {
    auto os = open_out(out / "trips.csv");
    os << "vehicle,entry,exit,arrival_s,entered_s,internal_s,exit_s,distance_mi,travel_time_s,speed_mph\n";
    for (const auto& t : r.trips)
      os << t.vehicle << ',' << link(t.entry_link) << ',' << link(t.exit_link) << ',' << format_number(t.arrival_s)
         << ',' << format_number(t.entered_s) << ',' << format_number(t.internal_s) << ','
         << format_number(t.exit_s) << ',' << format_number(t.distance_mi) << ','
         << format_number(t.travel_time_s()) << ',' << format_number(t.speed_mph()) << '\n';
  }
  {
    auto os = open_out(out / "route_travel_times.csv");
    os << "entry,exit,entered_s,travel_time_s\n";
    for (const auto& [p, rt] : r.routes)
      for (const auto& [t, tt] : rt.samples)
        os << link(p.first) << ',' << link(p.second) << ',' << format_number(t) << ',' << format_number(tt) << '\n';
  }
  {
    auto os = open_out(out / "excess_green.csv");
    os << "from,to,node,actuated_s,empty_s,excess\n";
    for (const auto& p : r.excess.phases) {
      const auto& m = g.movement(p.movement);
      const auto e = p.excess();
      os << m.from_link << ',' << m.to_link << ',' << g.node(g.movement_node(p.movement)).id << ','
         << format_number(p.actuated_s) << ',' << format_number(p.empty_s) << ',' << (e ? format_number(*e) : "")
         << '\n';
    }
  }
  {
    auto os = open_out(out / "excess_green_cdf.csv");
    os << "excess,F\n";
    for (const auto& [e, f] : r.excess.cdf) os << format_number(e) << ',' << format_number(f) << '\n';
  }
  {
    auto os = open_out(out / "mqd.csv");
    os << "time_s,e_vph,a_vph,d_vph,cum_e,cum_a,cum_d,w,n\n";
    for (const auto& b : r.macro.bins)
      os << format_number(b.start_s) << ',' << format_number(b.e_vph) << ',' << format_number(b.a_vph) << ','
         << format_number(b.d_vph) << ',' << b.cum_e << ',' << b.cum_a << ',' << b.cum_d << ',' << b.w << ','
         << b.n << '\n';
  }
  {
    auto os = open_out(out / "queue_series.csv");
    os << "time_s,total_queue\n";
    for (std::size_t b = 0; b < r.queues.mean_total.size(); ++b)
      os << format_number(static_cast<double>(b) * r.queues.bin_s) << ',' << format_number(r.queues.mean_total[b])
         << '\n';
  }
  {
    auto os = open_out(out / "mfd.csv");
    os << "time_s,flow_vph,occupancy\n";
    for (const auto& p : r.mfd)
      os << format_number(p.start_s) << ',' << format_number(p.flow_vph) << ',' << format_number(p.occupancy) << '\n';
  }
  auto os = open_out(out / "summary.json");
  os << metrics_summary_json(g, r);
}

}  // namespace artcal
