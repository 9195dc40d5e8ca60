#include "artcal/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>
#include <random>
#include <tuple>
#include <unordered_map>
#include <utility>

namespace artcal {

namespace {

// Declaration order is the tie-break at equal times.
enum class Action : std::uint8_t { signal, serve, exit, join, arrival };

struct Pending {
  double time = 0.0;
  Action action = Action::signal;
  std::uint64_t key = 0;  // control, movement, vehicle or stream index
  std::uint64_t seq = 0;
};

struct Later {
  bool operator()(const Pending& a, const Pending& b) const {
    return std::tie(a.time, a.action, a.key, a.seq) > std::tie(b.time, b.action, b.key, b.seq);
  }
};

struct Vehicle {
  std::size_t commodity = 0;
  std::size_t link = kNone;
  std::size_t movement = kNone;
  std::size_t route_pos = 0;
  std::mt19937_64 rng;
};

struct Waiting {
  std::int64_t id = 0;
  std::size_t stream = 0;
  std::uint64_t ordinal = 0;
};

struct Stream {
  std::size_t commodity = 0;
  std::size_t entry = kNone;
  double rate_vph = 0.0;
  std::mt19937_64 rng;
  std::uint64_t count = 0;
  bool idle = false;
};

struct Segment {
  double start = 0.0;
  std::vector<std::size_t> green;
};

struct NodeControl {
  std::size_t node = kNone;
  double cycle = 0.0;
  double lost = 0.0;
  double offset = 0.0;
  std::vector<std::size_t> movements;          // all movements at the node
  std::vector<Segment> segments;               // fixed time, over [0, cycle)
  std::vector<std::vector<std::size_t>> stages;  // max pressure
  bool started = false;
  std::int64_t period = 0;  // cycle (fixed time) or epoch (max pressure) counter
  std::size_t segment = 0;
  bool clearance_next = false;
  std::vector<std::size_t> green_now;
};

std::uint32_t low(std::uint64_t v) { return static_cast<std::uint32_t>(v); }
std::uint32_t high(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

std::vector<std::size_t> stage_movements(const NetworkGraph& g, const Stage& st) {
  std::vector<std::size_t> out;
  for (const auto& ph : st.greens)
    if (ph.duration_s > 0.0) out.push_back(g.movement_index(ph.from_link, ph.to_link));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Stage i runs from its start for its longest phase, each phase green for its
// own duration; the time the plan leaves unused is all red, split evenly
// after each stage.
std::vector<Segment> fixed_time_segments(const NetworkGraph& g, const TimingPlan& plan, double cycle) {
  double used = 0.0;
  std::size_t active = 0;
  for (const auto& st : plan.stages) {
    used += st.duration_s();
    if (st.duration_s() > 0.0) ++active;
  }
  if (used > cycle + 1e-9)
    throw InputError("timing plan at node '" + plan.node_id + "' runs " + std::to_string(used) +
                     " s, longer than its cycle");
  const double clearance = active ? (cycle - used) / static_cast<double>(active) : cycle;

  std::vector<Segment> segs;
  double t = 0.0;
  for (const auto& st : plan.stages) {
    const double d = st.duration_s();
    if (d <= 0.0) continue;
    std::vector<double> ends;
    for (const auto& ph : st.greens)
      if (ph.duration_s > 0.0) ends.push_back(ph.duration_s);
    std::sort(ends.begin(), ends.end());
    ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
    double prev = 0.0;
    for (double e : ends) {
      Segment s{t + prev, {}};
      for (const auto& ph : st.greens)
        if (ph.duration_s > prev) s.green.push_back(g.movement_index(ph.from_link, ph.to_link));
      std::sort(s.green.begin(), s.green.end());
      s.green.erase(std::unique(s.green.begin(), s.green.end()), s.green.end());
      segs.push_back(std::move(s));
      prev = e;
    }
    t += d;
    if (clearance > 0.0) {
      segs.push_back({t, {}});
      t += clearance;
    }
  }
  if (segs.empty()) segs.push_back({0.0, {}});

  std::vector<Segment> merged;
  for (auto& s : segs)
    if (merged.empty() || merged.back().green != s.green) merged.push_back(std::move(s));
  return merged;
}

}  // namespace

struct Simulator::State {
  const NetworkGraph& g;
  std::vector<CommodityDemand> demands;
  SimConfig config;
  EventSink sink;

  std::priority_queue<Pending, std::vector<Pending>, Later> agenda;
  std::uint64_t seq = 0;
  double now = 0.0;
  double scale = 1.0;

  std::vector<std::size_t> occupancy;
  std::vector<double> storage;
  std::vector<std::deque<std::int64_t>> queue;
  std::vector<double> last_cross, headway, pending_serve;
  std::vector<char> green, blocked, awaiting_space;
  std::vector<std::vector<std::size_t>> waiters;  // movements blocked on a link
  std::vector<std::deque<Waiting>> outside;       // per entry link
  std::unordered_map<std::int64_t, Vehicle> vehicles;
  std::int64_t next_id = 0;
  std::int64_t exited = 0;
  std::size_t outside_count = 0;

  std::vector<Stream> streams;
  std::vector<std::vector<std::size_t>> route_moves;  // per commodity; empty for ratio routing
  std::vector<std::vector<std::vector<std::pair<std::size_t, double>>>> choices;  // [commodity][link]: cumulative
  RatioVector mp_ratios;
  std::vector<NodeControl> controls;

  State(const NetworkGraph& graph, std::vector<CommodityDemand> d, SimConfig c, EventSink s)
      : g(graph), demands(std::move(d)), config(c), sink(std::move(s)), scale(c.demand_scale) {
    if (!(config.horizon_s > 0.0) || !std::isfinite(config.horizon_s))
      throw InputError("simulation horizon must be positive and finite");
    if (config.controller.mode == ControlMode::max_pressure && config.controller.decisions_per_cycle < 1)
      throw InputError("max pressure needs at least one decision per cycle");
    if (!(scale >= 0.0)) throw InputError("demand scale must be nonnegative");
    if (!sink) sink = [](const SimEvent&) {};

    const auto nl = g.num_links(), nm = g.num_movements();
    occupancy.assign(nl, 0);
    storage.resize(nl);
    for (std::size_t l = 0; l < nl; ++l) storage[l] = g.link(l).storage_capacity;
    waiters.resize(nl);
    outside.resize(nl);
    queue.resize(nm);
    last_cross.assign(nm, -kInfinity);
    pending_serve.assign(nm, std::nan(""));
    headway.resize(nm);
    green.assign(nm, 0);
    blocked.assign(nm, 0);
    awaiting_space.assign(nm, 0);
    for (std::size_t mv = 0; mv < nm; ++mv) {
      const double c = g.movement(mv).saturation_flow_vph;
      headway[mv] = c > 0.0 ? 3600.0 / c : kInfinity;
      const auto node = g.movement_node(mv);
      if (g.movement(mv).allowed && (node == kNone || !g.plan_for(node))) green[mv] = 1;
    }

    build_routing();
    build_controls();

    for (std::size_t i = 0; i < controls.size(); ++i) schedule(0.0, Action::signal, i);
    for (std::size_t s = 0; s < streams.size(); ++s) schedule_arrival(s, true);
  }

  void build_routing() {
    route_moves.resize(demands.size());
    choices.resize(demands.size());
    const std::uint64_t seed = config.seed;
    for (std::size_t p = 0; p < demands.size(); ++p) {
      const auto& d = demands[p];
      if (d.fixed_route()) {
        for (std::size_t i = 0; i + 1 < d.route.size(); ++i) {
          const auto mv = g.movement_index(d.route[i], d.route[i + 1]);
          if (!g.movement(mv).allowed)
            throw InputError("route of commodity " + std::to_string(d.index) + " uses a forbidden movement");
          route_moves[p].push_back(mv);
        }
        if (g.link(g.link_index(d.route.back())).kind != LinkKind::exit)
          throw InputError("route of commodity " + std::to_string(d.index) + " does not end at an exit link");
      } else {
        const auto ratios = ratio_vector(g, d.turn_ratios);
        const auto flows = commodity_flows(g, d);
        auto& table = choices[p];
        table.resize(g.num_links());
        for (std::size_t l = 0; l < g.num_links(); ++l) {
          double total = 0.0;
          for (auto mv : g.movements_from(l)) {
            const double r = ratios(static_cast<Eigen::Index>(mv));
            if (r <= 0.0) continue;
            if (!g.movement(mv).allowed)
              throw InputError("commodity " + std::to_string(d.index) + " sends traffic through forbidden movement " +
                               to_string(MovementKey{g.movement(mv).from_link, g.movement(mv).to_link}));
            total += r;
            table[l].emplace_back(mv, total);
          }
          for (auto& entry : table[l]) entry.second /= total;
          if (table[l].empty() && g.link(l).kind != LinkKind::exit && flows.link(static_cast<Eigen::Index>(l)) > 0.0)
            throw InputError("commodity " + std::to_string(d.index) + " reaches link '" + g.link(l).id +
                             "' but has no turn ratios out of it");
        }
      }
      for (const auto& [id, vph] : d.entry_flows_vph) {
        const auto entry = g.link_index(id);
        if (g.link(entry).kind != LinkKind::entry)
          throw InputError("demand on '" + id + "', which is not an entry link");
        if (d.fixed_route() && id != d.route.front())
          throw InputError("route commodity " + std::to_string(d.index) + " has demand off its route start");
        if (!(vph >= 0.0)) throw InputError("negative demand on '" + id + "'");
        Stream st;
        st.commodity = p;
        st.entry = entry;
        st.rate_vph = vph;
        std::seed_seq seq{low(seed), high(seed), static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(entry), 0u};
        st.rng.seed(seq);
        streams.push_back(std::move(st));
      }
    }
    mp_ratios = aggregate_commodities(demands, g).ratios;
  }

  void build_controls() {
    for (std::size_t n = 0; n < g.num_nodes(); ++n) {
      const auto* plan = g.plan_for(n);
      if (!plan) continue;
      NodeControl c;
      c.node = n;
      c.cycle = g.node(n).cycle_time_s;
      c.lost = g.node(n).lost_time_s;
      c.offset = plan->offset_s;
      if (!(c.cycle > 0.0)) throw InputError("signalized node '" + g.node(n).id + "' needs a positive cycle time");
      if (c.lost < 0.0 || c.lost >= c.cycle)
        throw InputError("node '" + g.node(n).id + "' lost time must lie in [0, cycle)");
      for (auto l : g.incoming(n))
        for (auto mv : g.movements_from(l)) c.movements.push_back(mv);
      std::sort(c.movements.begin(), c.movements.end());
      if (config.controller.mode == ControlMode::fixed_time) {
        c.segments = fixed_time_segments(g, *plan, c.cycle);
      } else {
        for (const auto& st : plan->stages) c.stages.push_back(stage_movements(g, st));
        if (c.stages.empty()) c.stages.emplace_back();
      }
      controls.push_back(std::move(c));
    }
  }

  void schedule(double t, Action a, std::uint64_t key) { agenda.push({t, a, key, seq++}); }

  void emit(EventKind kind, std::int64_t vehicle, std::size_t from, std::size_t to, std::size_t node) {
    sink(SimEvent{now, kind, vehicle, from, to, node});
  }

  // ---- arrivals

  void schedule_arrival(std::size_t s, bool first) {
    auto& st = streams[s];
    const double rate = st.rate_vph * scale;
    if (!(rate > 0.0)) {
      st.idle = true;
      return;
    }
    st.idle = false;
    double gap;
    if (config.arrivals == ArrivalProcess::deterministic) {
      gap = 3600.0 / rate;
      if (first) gap *= 0.5;
    } else {
      gap = std::exponential_distribution<double>(rate / 3600.0)(st.rng);
    }
    schedule(now + gap, Action::arrival, s);
  }

  void on_arrival(std::size_t s) {
    if (now >= config.horizon_s) return;
    auto& st = streams[s];
    const auto id = next_id++;
    emit(EventKind::external_arrival, id, kNone, st.entry, kNone);
    outside[st.entry].push_back({id, s, st.count++});
    ++outside_count;
    admit(st.entry);
    schedule_arrival(s, false);
  }

  void admit(std::size_t entry) {
    auto& line = outside[entry];
    while (!line.empty() && static_cast<double>(occupancy[entry]) < storage[entry]) {
      const auto w = line.front();
      line.pop_front();
      --outside_count;
      const auto& st = streams[w.stream];
      Vehicle v;
      v.commodity = st.commodity;
      const std::uint64_t seed = config.seed;
      std::seed_seq seq{low(seed), high(seed), static_cast<std::uint32_t>(st.commodity),
                        static_cast<std::uint32_t>(entry), low(w.ordinal), high(w.ordinal), 1u};
      v.rng.seed(seq);
      vehicles.emplace(w.id, std::move(v));
      enter(w.id, entry, kNone);
    }
  }

  // ---- vehicle lifecycle

  double travel_time(Vehicle& v, std::size_t l) {
    const double mean = g.link(l).travel_time_s;
    if (config.travel_times == TravelTimeModel::constant || !(mean > 0.0)) return std::max(0.0, mean);
    return std::exponential_distribution<double>(1.0 / mean)(v.rng);
  }

  std::size_t choose_movement(Vehicle& v, std::size_t l) {
    const auto& route = route_moves[v.commodity];
    if (!route.empty()) return route.at(v.route_pos);
    const auto& options = choices[v.commodity][l];
    if (options.empty())
      throw ComputationError("vehicle of commodity " + std::to_string(demands[v.commodity].index) +
                             " has no movement out of link '" + g.link(l).id + "'");
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(v.rng);
    for (const auto& [mv, cumulative] : options)
      if (u < cumulative) return mv;
    return options.back().first;
  }

  void enter(std::int64_t id, std::size_t l, std::size_t from) {
    auto& v = vehicles.at(id);
    v.link = l;
    ++occupancy[l];
    emit(EventKind::enter_link, id, from, l, g.tail(l));
    const double tt = travel_time(v, l);
    if (g.link(l).kind == LinkKind::exit) {
      v.movement = kNone;
      schedule(now + tt, Action::exit, static_cast<std::uint64_t>(id));
      return;
    }
    v.movement = choose_movement(v, l);
    schedule(now + tt, Action::join, static_cast<std::uint64_t>(id));
  }

  void on_join(std::int64_t id) {
    const auto mv = vehicles.at(id).movement;
    queue[mv].push_back(id);
    emit(EventKind::join_queue, id, g.movement_from(mv), g.movement_to(mv), g.movement_node(mv));
    if (queue[mv].size() == 1) request_serve(mv, now);
  }

  void on_exit(std::int64_t id) {
    const auto l = vehicles.at(id).link;
    emit(EventKind::exit_network, id, l, kNone, kNone);
    --occupancy[l];
    vehicles.erase(id);
    ++exited;
    freed(l);
  }

  // ---- service

  void request_serve(std::size_t mv, double t) {
    if (!std::isnan(pending_serve[mv]) && pending_serve[mv] <= t) return;
    pending_serve[mv] = t;
    schedule(t, Action::serve, mv);
  }

  void on_serve(std::size_t mv) {
    if (pending_serve[mv] == now) pending_serve[mv] = std::nan("");
    try_serve(mv);
  }

  void try_serve(std::size_t mv) {
    auto& q = queue[mv];
    if (q.empty() || !green[mv] || !std::isfinite(headway[mv])) return;
    const double ready = last_cross[mv] + headway[mv];
    if (ready > now) {
      request_serve(mv, ready);
      return;
    }
    const auto from = g.movement_from(mv), to = g.movement_to(mv), node = g.movement_node(mv);
    if (static_cast<double>(occupancy[to]) >= storage[to]) {
      if (!blocked[mv]) {
        blocked[mv] = 1;
        emit(EventKind::blocked, q.front(), from, to, node);
      }
      if (!awaiting_space[mv]) {
        awaiting_space[mv] = 1;
        waiters[to].push_back(mv);
      }
      return;
    }
    const auto id = q.front();
    q.pop_front();
    emit(EventKind::cross_intersection, id, from, to, node);
    blocked[mv] = 0;
    last_cross[mv] = now;
    --occupancy[from];
    ++vehicles.at(id).route_pos;
    enter(id, to, from);
    freed(from);
    if (!q.empty()) request_serve(mv, now + headway[mv]);
  }

  void freed(std::size_t l) {
    if (g.link(l).kind == LinkKind::entry) admit(l);
    if (waiters[l].empty()) return;
    const auto woken = std::exchange(waiters[l], {});
    for (auto mv : woken) {
      awaiting_space[mv] = 0;
      request_serve(mv, now);
    }
  }

  // ---- signals

  void set_green(NodeControl& c, const std::vector<std::size_t>& next) {
    for (auto mv : c.movements) green[mv] = 0;
    for (auto mv : next)
      if (g.movement(mv).allowed) green[mv] = 1;
    if (next.empty()) emit(EventKind::phase_change, -1, kNone, kNone, c.node);
    for (auto mv : next) emit(EventKind::phase_change, -1, g.movement_from(mv), g.movement_to(mv), c.node);
    for (auto mv : next) {
      if (std::binary_search(c.green_now.begin(), c.green_now.end(), mv)) continue;
      blocked[mv] = 0;
      request_serve(mv, now);
    }
    c.green_now = next;
  }

  void on_signal(std::size_t index) {
    auto& c = controls[index];
    if (config.controller.mode == ControlMode::fixed_time)
      fixed_time_step(c, index);
    else
      max_pressure_step(c, index);
  }

  void fixed_time_step(NodeControl& c, std::size_t index) {
    if (!c.started) {
      c.started = true;
      c.period = static_cast<std::int64_t>(std::floor((now - c.offset) / c.cycle));
      const double tau = now - (c.offset + static_cast<double>(c.period) * c.cycle);
      c.segment = 0;
      while (c.segment + 1 < c.segments.size() && c.segments[c.segment + 1].start <= tau) ++c.segment;
    } else if (++c.segment == c.segments.size()) {
      c.segment = 0;
      ++c.period;
    }
    set_green(c, c.segments[c.segment].green);
    const double cycle_start = c.offset + static_cast<double>(c.period) * c.cycle;
    const double next = c.segment + 1 < c.segments.size() ? c.segments[c.segment + 1].start : c.cycle;
    schedule(cycle_start + next, Action::signal, index);
  }

  double stage_pressure(const std::vector<std::size_t>& stage) const {
    double p = 0.0;
    for (auto mv : stage) {
      if (!g.movement(mv).allowed) continue;
      double downstream = 0.0;
      for (auto next : g.movements_from(g.movement_to(mv)))
        downstream += mp_ratios(static_cast<Eigen::Index>(next)) * static_cast<double>(queue[next].size());
      p += g.movement(mv).saturation_flow_vph * (static_cast<double>(queue[mv].size()) - downstream);
    }
    return p;
  }

  // Every epoch of length T/k ends with L/k of all red, so the node gets the
  // same green per cycle as under its fixed-time plan.
  void max_pressure_step(NodeControl& c, std::size_t index) {
    const double k = config.controller.decisions_per_cycle;
    const double epoch = c.cycle / k, green_len = (c.cycle - c.lost) / k;
    auto epoch_start = [&](std::int64_t j) { return c.offset + static_cast<double>(j) * epoch; };

    bool decide;
    if (!c.started) {
      c.started = true;
      c.period = static_cast<std::int64_t>(std::floor((now - c.offset) / epoch));
      decide = now - epoch_start(c.period) < green_len;
    } else {
      decide = !c.clearance_next;
    }

    if (decide) {
      std::size_t best = 0;
      double best_pressure = -kInfinity;
      for (std::size_t i = 0; i < c.stages.size(); ++i) {
        const double p = stage_pressure(c.stages[i]);
        if (p > best_pressure) {
          best_pressure = p;
          best = i;
        }
      }
      set_green(c, c.stages[best]);
      if (c.lost > 0.0) {
        c.clearance_next = true;
        schedule(epoch_start(c.period) + green_len, Action::signal, index);
        return;
      }
    } else {
      set_green(c, {});
    }
    c.clearance_next = false;
    ++c.period;
    schedule(epoch_start(c.period), Action::signal, index);
  }

  // ---- loop

  void step() {
    const Pending e = agenda.top();
    agenda.pop();
    now = e.time;
    switch (e.action) {
      case Action::signal: on_signal(e.key); break;
      case Action::serve: on_serve(e.key); break;
      case Action::exit: on_exit(static_cast<std::int64_t>(e.key)); break;
      case Action::join: on_join(static_cast<std::int64_t>(e.key)); break;
      case Action::arrival: on_arrival(e.key); break;
    }
  }

  void run_until(double t) {
    while (!agenda.empty() && agenda.top().time < t) step();
    now = std::max(now, t);
  }

  void drain() {
    const double limit = config.horizon_s + config.drain_limit_s;
    while (!agenda.empty() && (!vehicles.empty() || outside_count > 0) && agenda.top().time < limit) step();
  }

  void set_scale(double gamma) {
    if (!(gamma >= 0.0)) throw InputError("demand scale must be nonnegative");
    scale = gamma;
    for (std::size_t s = 0; s < streams.size(); ++s)
      if (streams[s].idle) schedule_arrival(s, true);
  }
};

Simulator::Simulator(const NetworkGraph& g, std::vector<CommodityDemand> demands, SimConfig config, EventSink sink)
    : state_(std::make_unique<State>(g, std::move(demands), config, std::move(sink))) {}

Simulator::~Simulator() = default;

void Simulator::set_demand_scale(double gamma) { state_->set_scale(gamma); }
void Simulator::run_until(double t) { state_->run_until(t); }

void Simulator::run() {
  state_->run_until(state_->config.horizon_s);
  if (state_->config.drain) state_->drain();
}

double Simulator::now() const { return state_->now; }
std::int64_t Simulator::vehicles_created() const { return state_->next_id; }
std::int64_t Simulator::vehicles_exited() const { return state_->exited; }
std::size_t Simulator::vehicles_inside() const { return state_->vehicles.size(); }
std::size_t Simulator::vehicles_waiting_outside() const { return state_->outside_count; }
std::size_t Simulator::occupancy(std::size_t link) const { return state_->occupancy.at(link); }
std::size_t Simulator::queue_length(std::size_t movement) const { return state_->queue.at(movement).size(); }

std::vector<MovementStability> stability_check(const NetworkGraph& g, const FlowSolution& flows) {
  std::vector<MovementStability> out;
  for (std::size_t mv = 0; mv < g.num_movements(); ++mv) {
    MovementStability s;
    s.movement = mv;
    s.flow = flows.movement_flows(static_cast<Eigen::Index>(mv));
    s.capacity = effective_capacity(g, mv);
    s.margin = s.capacity - s.flow;
    s.ok = s.margin > 0.0;
    out.push_back(s);
  }
  return out;
}

std::vector<SimEvent> run(const NetworkGraph& g, std::span<const CommodityDemand> demands, const SimConfig& config) {
  std::vector<SimEvent> log;
  Simulator sim(g, {demands.begin(), demands.end()}, config, [&log](const SimEvent& e) { log.push_back(e); });
  sim.run();
  return log;
}

SweepResult loading_sweep(const NetworkGraph& g, std::span<const CommodityDemand> demands, SimConfig config,
                          std::span<const double> factors, double step_hours) {
  if (factors.empty()) throw InputError("loading sweep needs at least one factor");
  if (!(step_hours > 0.0)) throw InputError("loading sweep step must be positive");
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (!(factors[i] > 0.0)) throw InputError("loading factors must be positive");
    if (i > 0 && !(factors[i] > factors[i - 1])) throw InputError("loading factors must be increasing");
  }
  const double step = step_hours * 3600.0;
  config.horizon_s = step * static_cast<double>(factors.size());
  config.demand_scale = factors[0];
  config.drain = false;

  SweepResult out;
  Simulator sim(g, {demands.begin(), demands.end()}, config, [&out](const SimEvent& e) { out.events.push_back(e); });
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (i > 0) sim.set_demand_scale(factors[i]);
    SweepSegment seg{factors[i], step * static_cast<double>(i), step * static_cast<double>(i + 1), out.events.size(), 0};
    sim.run_until(seg.end_s);
    seg.end_event = out.events.size();
    out.segments.push_back(seg);
  }
  return out;
}

}  // namespace artcal
