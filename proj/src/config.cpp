// Copyright 2026 The vlmpc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vlmpc/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace vlmpc {

using nlohmann::json;

ExperimentKind parse_experiment_kind(std::string_view name) {
  if (name == "train") return ExperimentKind::train;
  if (name == "mismatch_sweep") return ExperimentKind::mismatch_sweep;
  if (name == "benchmark") return ExperimentKind::benchmark;
  throw std::invalid_argument("unknown experiment '" + std::string(name) + "'");
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::train: return "train";
    case ExperimentKind::mismatch_sweep: return "mismatch_sweep";
    case ExperimentKind::benchmark: return "benchmark";
  }
  return "unknown";
}

namespace {

int line_of(std::string_view text, std::size_t offset) {
  int line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) line += text[i] == '\n';
  return line;
}

struct Context {
  std::string_view text;
  std::string source;

  [[noreturn]] void fail(const std::string& path, const std::string& message) const {
    std::ostringstream os;
    os << source;
    // Locate the key textually; good enough for hand-written files.
    const auto dot = path.find_last_of('.');
    std::string leaf = dot == std::string::npos ? path : path.substr(dot + 1);
    if (auto br = leaf.find('['); br != std::string::npos) leaf.resize(br);
    if (!leaf.empty()) {
      const auto pos = text.find("\"" + leaf + "\"");
      if (pos != std::string_view::npos) os << ":" << line_of(text, pos);
    }
    os << ": field '" << path << "': " << message;
    throw ConfigError(os.str());
  }
};

class Section {
 public:
  Section(const Context& ctx, const json& node, std::string path)
      : ctx_(ctx), node_(node), path_(std::move(path)) {
    if (!node_.is_object()) ctx_.fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* find(const std::string& key) {
    used_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) ctx_.fail(field_path(key), "expected a number");
      out = v->get<double>();
    }
  }

  template <class Int>
  void integer(const std::string& key, Int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) ctx_.fail(field_path(key), "expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned() || v->get<long long>() >= 0) {
          out = v->get<Int>();
        } else {
          ctx_.fail(field_path(key), "expected a non-negative integer");
        }
      } else {
        out = v->get<Int>();
      }
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) ctx_.fail(field_path(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void text(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) ctx_.fail(field_path(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  /// String field converted with `parse`, which may throw std::invalid_argument.
  template <class T, class Parse>
  void named(const std::string& key, T& out, Parse parse) {
    std::string name;
    if (find(key) == nullptr) return;
    text(key, name);
    try {
      out = parse(name);
    } catch (const std::invalid_argument& e) {
      ctx_.fail(field_path(key), e.what());
    }
  }

  template <class T, class Item>
  void list(const std::string& key, std::vector<T>& out, Item item) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_array()) ctx_.fail(field_path(key), "expected a list");
    out.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      out.push_back(item((*v)[i], field_path(key) + "[" + std::to_string(i) + "]"));
    }
  }

  template <class F>
  void child(const std::string& key, F read) {
    if (const json* v = find(key)) {
      Section sub(ctx_, *v, field_path(key));
      read(sub);
      sub.finish();
    }
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!used_.count(it.key())) ctx_.fail(field_path(it.key()), "unknown field");
    }
  }

  const Context& context() const { return ctx_; }

 private:
  const Context& ctx_;
  const json& node_;
  std::string path_;
  std::set<std::string> used_;
};

void read_env(Section& s, EnvSettings& env) {
  s.number("tau_s", env.plant.tau_s);
  s.number("dt_s", env.plant.dt_s);
  s.number("v_max_mps", env.plant.limits.v_max);
  s.number("omega_max_radps", env.plant.limits.omega_max);
  s.number("a_max_mps2", env.plant.limits.a_max);
  s.number("alpha_max_radps2", env.plant.limits.alpha_max);
  s.integer("control_substeps", env.control_substeps);
  s.number("control_point_m", env.l_m);
  s.number("abort_error_m", env.abort_error_m);
  s.named("reward", env.reward.mode, parse_reward_mode);
  s.number("sparse_threshold_m", env.reward.sparse_threshold_m);
  s.number("sparse_penalty", env.reward.sparse_penalty);
  s.child("track", [&](Section& t) {
    TrackParams& p = env.track;
    t.number("speed_mps", p.speed_mps);
    t.number("straight_length_m", p.straight_length_m);
    t.number("lead_length_m", p.lead_length_m);
    t.number("curve_radius_m", p.curve_radius_m);
    t.number("curve_angle_rad", p.curve_angle_rad);
    t.number("tight_radius_m", p.tight_radius_m);
    t.number("tight_angle_rad", p.tight_angle_rad);
    t.number("oval_straight_m", p.oval_straight_m);
    t.number("oval_radius_m", p.oval_radius_m);
  });
}

void read_train(Section& s, TrainConfig& tc, TrainingSchedule& sch) {
  s.number("gamma", tc.gamma);
  s.integer("n_step", tc.n_step);
  s.number("polyak_rho", tc.rho);
  s.number("jacobian_beta", tc.beta);
  s.number("weight_decay_lambda", tc.lambda);
  s.integer("batch_size", tc.batch_size);
  s.integer("update_interval_steps", tc.update_interval);
  s.number("learning_rate", tc.learning_rate);
  s.integer("max_updates", sch.max_updates);
  s.named("track", sch.track, parse_track_kind);
  s.number("episode_duration_s", sch.episode_duration_s);
  s.number("init_lateral_m", sch.init_lateral_m);
  s.number("init_heading_rad", sch.init_heading_rad);
  s.number("init_longitudinal_m", sch.init_longitudinal_m);
  s.number("init_speed_mps", sch.init_speed_mps);
  s.boolean("random_start", sch.random_start);
  s.boolean("evaluation_episode", sch.evaluation_episode);
  s.integer("buffer_capacity", sch.buffer_capacity);
  s.integer("checkpoint_interval_episodes", sch.checkpoint_interval_episodes);
  s.list("hidden", sch.hidden, [&](const json& v, const std::string& path) {
    if (!v.is_number_integer()) s.context().fail(path, "expected an integer");
    return v.get<int>();
  });
}

void read_mpc(Section& s, MpcConfig& m) {
  s.integer("horizon", m.horizon);
  s.number("delta_t_s", m.delta_t_s);
  s.number("gamma", m.gamma);
  s.named("mode", m.mode, parse_cost_mode);
  s.integer("sqp_iters", m.sqp_iters);
  s.number("damping_mu", m.mu);
  s.number("velocity_penalty", m.velocity_penalty);
  s.number("action_weight_scale", m.action_weight_scale);
  s.integer("qp_max_iter", m.qp_max_iter);
  s.named("velocity_source", m.plan_from_commands, [](const std::string& name) {
    if (name == "command") return true;
    if (name == "measured") return false;
    throw std::invalid_argument("expected 'command' or 'measured', got '" + name + "'");
  });
  s.child("expert_weights", [&](Section& w) {
    w.number("x_err", m.expert.x_err);
    w.number("y_err", m.expert.y_err);
    w.number("psi_err", m.expert.psi_err);
    w.number("v_dev", m.expert.v_dev);
    w.number("omega_dev", m.expert.omega_dev);
    w.number("a", m.expert.a);
    w.number("alpha", m.expert.alpha);
  });
}

template <class T, class Parse>
auto named_item(const Context& ctx, Parse parse) {
  return [&ctx, parse](const json& v, const std::string& path) -> T {
    if (!v.is_string()) ctx.fail(path, "expected a string");
    try {
      return parse(v.get<std::string>());
    } catch (const std::invalid_argument& e) {
      ctx.fail(path, e.what());
    }
  };
}

}  // namespace

void ExperimentConfig::validate() const {
  auto check = [](bool ok, const char* field, const char* message) {
    if (!ok) throw ConfigError(std::string("field '") + field + "': " + message);
  };
  auto wrap = [](const char* field, auto&& fn) {
    try {
      fn();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("field '") + field + "': " + e.what());
    }
  };
  wrap("env", [&] { env.plant.validate(); });
  wrap("env", [&] { env.reward.validate(); });
  wrap("train", [&] { train.validate(); });
  wrap("mpc", [&] { mpc.validate(); });
  check(env.l_m > 0.0, "env.control_point_m", "must be > 0");
  check(env.abort_error_m > 0.0, "env.abort_error_m", "must be > 0");
  check(env.control_substeps >= 1, "env.control_substeps", "must be >= 1");
  check(env.track.speed_mps > 0.0, "env.track.speed_mps", "must be > 0");
  check(schedule.max_updates >= 0, "train.max_updates", "must be >= 0");
  check(schedule.episode_duration_s > 0.0, "train.episode_duration_s", "must be > 0");
  check(schedule.init_lateral_m >= 0.0, "train.init_lateral_m", "must be >= 0");
  check(schedule.init_heading_rad >= 0.0, "train.init_heading_rad", "must be >= 0");
  check(schedule.init_longitudinal_m >= 0.0, "train.init_longitudinal_m", "must be >= 0");
  check(schedule.init_speed_mps >= 0.0 && schedule.init_speed_mps <= env.plant.limits.v_max,
        "train.init_speed_mps", "must be in [0, v_max]");
  check(schedule.buffer_capacity >= static_cast<std::size_t>(train.batch_size),
        "train.buffer_capacity", "must hold at least one batch");
  check(!schedule.hidden.empty(), "train.hidden", "needs at least one hidden layer");
  for (int h : schedule.hidden) check(h > 0, "train.hidden", "layer widths must be > 0");
  check(schedule.checkpoint_interval_episodes >= 1, "train.checkpoint_interval_episodes",
        "must be >= 1");
  check(!seeds.empty(), "seeds", "must not be empty");
  check(!output_dir.empty(), "output_dir", "must not be empty");
  check(straight_offset_m >= 0.0, "straight_offset_m", "must be >= 0");
  if (experiment == ExperimentKind::mismatch_sweep) {
    check(!tau_list.empty(), "tau_list_s", "must not be empty for a mismatch sweep");
    check(!controllers.empty(), "controllers", "must not be empty");
  }
  for (double tau : tau_list) check(tau > 0.0, "tau_list_s", "time constants must be > 0");
  if (experiment == ExperimentKind::benchmark) {
    check(!tracks.empty(), "tracks", "must not be empty for a benchmark");
  }
}

ExperimentConfig parse_config(std::string_view text, std::string_view source) {
  const Context ctx{text, std::string(source)};
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::ostringstream os;
    os << source << ":" << line_of(text, e.byte == 0 ? 0 : e.byte - 1) << ": syntax error: "
       << e.what();
    throw ConfigError(os.str());
  }

  ExperimentConfig cfg;
  Section s(ctx, root, "");
  s.named("experiment", cfg.experiment, parse_experiment_kind);
  s.child("env", [&](Section& e) { read_env(e, cfg.env); });
  s.child("train", [&](Section& t) { read_train(t, cfg.train, cfg.schedule); });
  s.child("mpc", [&](Section& m) { read_mpc(m, cfg.mpc); });
  s.list("tau_list_s", cfg.tau_list, [&](const json& v, const std::string& path) {
    if (!v.is_number()) ctx.fail(path, "expected a number");
    return v.get<double>();
  });
  s.list("tracks", cfg.tracks, named_item<TrackKind>(ctx, parse_track_kind));
  s.list("controllers", cfg.controllers, named_item<CostMode>(ctx, parse_cost_mode));
  s.list("seeds", cfg.seeds, [&](const json& v, const std::string& path) {
    if (!v.is_number_unsigned()) ctx.fail(path, "expected a non-negative integer");
    return v.get<std::uint64_t>();
  });
  std::string out = cfg.output_dir.string();
  s.text("output_dir", out);
  cfg.output_dir = out;
  s.text("checkpoint", cfg.checkpoint);
  s.text("sparse_checkpoint", cfg.sparse_checkpoint);
  s.number("straight_offset_m", cfg.straight_offset_m);
  s.finish();

  cfg.mpc.limits = cfg.env.plant.limits;
  cfg.mpc.l_m = cfg.env.l_m;
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(source) + ": " + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

json to_json(const ExperimentConfig& c) {
  const auto& p = c.env.plant;
  const auto& t = c.env.track;
  json env = {{"tau_s", p.tau_s},
              {"dt_s", p.dt_s},
              {"v_max_mps", p.limits.v_max},
              {"omega_max_radps", p.limits.omega_max},
              {"a_max_mps2", p.limits.a_max},
              {"alpha_max_radps2", p.limits.alpha_max},
              {"control_substeps", c.env.control_substeps},
              {"control_point_m", c.env.l_m},
              {"abort_error_m", c.env.abort_error_m},
              {"reward", to_string(c.env.reward.mode)},
              {"sparse_threshold_m", c.env.reward.sparse_threshold_m},
              {"sparse_penalty", c.env.reward.sparse_penalty},
              {"track",
               {{"speed_mps", t.speed_mps},
                {"straight_length_m", t.straight_length_m},
                {"lead_length_m", t.lead_length_m},
                {"curve_radius_m", t.curve_radius_m},
                {"curve_angle_rad", t.curve_angle_rad},
                {"tight_radius_m", t.tight_radius_m},
                {"tight_angle_rad", t.tight_angle_rad},
                {"oval_straight_m", t.oval_straight_m},
                {"oval_radius_m", t.oval_radius_m}}}};
  json train = {{"gamma", c.train.gamma},
                {"n_step", c.train.n_step},
                {"polyak_rho", c.train.rho},
                {"jacobian_beta", c.train.beta},
                {"weight_decay_lambda", c.train.lambda},
                {"batch_size", c.train.batch_size},
                {"update_interval_steps", c.train.update_interval},
                {"learning_rate", c.train.learning_rate},
                {"max_updates", c.schedule.max_updates},
                {"track", to_string(c.schedule.track)},
                {"episode_duration_s", c.schedule.episode_duration_s},
                {"init_lateral_m", c.schedule.init_lateral_m},
                {"init_heading_rad", c.schedule.init_heading_rad},
                {"init_longitudinal_m", c.schedule.init_longitudinal_m},
                {"init_speed_mps", c.schedule.init_speed_mps},
                {"random_start", c.schedule.random_start},
                {"evaluation_episode", c.schedule.evaluation_episode},
                {"buffer_capacity", c.schedule.buffer_capacity},
                {"checkpoint_interval_episodes", c.schedule.checkpoint_interval_episodes},
                {"hidden", c.schedule.hidden}};
  const auto& w = c.mpc.expert;
  json mpc = {{"horizon", c.mpc.horizon},
              {"delta_t_s", c.mpc.delta_t_s},
              {"gamma", c.mpc.gamma},
              {"mode", to_string(c.mpc.mode)},
              {"sqp_iters", c.mpc.sqp_iters},
              {"damping_mu", c.mpc.mu},
              {"velocity_penalty", c.mpc.velocity_penalty},
              {"action_weight_scale", c.mpc.action_weight_scale},
              {"qp_max_iter", c.mpc.qp_max_iter},
              {"velocity_source", c.mpc.plan_from_commands ? "command" : "measured"},
              {"expert_weights",
               {{"x_err", w.x_err},
                {"y_err", w.y_err},
                {"psi_err", w.psi_err},
                {"v_dev", w.v_dev},
                {"omega_dev", w.omega_dev},
                {"a", w.a},
                {"alpha", w.alpha}}}};
  json tracks = json::array();
  for (TrackKind k : c.tracks) tracks.push_back(to_string(k));
  json controllers = json::array();
  for (CostMode m : c.controllers) controllers.push_back(to_string(m));
  return {{"experiment", to_string(c.experiment)},
          {"env", env},
          {"train", train},
          {"mpc", mpc},
          {"tau_list_s", c.tau_list},
          {"tracks", tracks},
          {"controllers", controllers},
          {"seeds", c.seeds},
          {"output_dir", c.output_dir.string()},
          {"checkpoint", c.checkpoint},
          {"sparse_checkpoint", c.sparse_checkpoint},
          {"straight_offset_m", c.straight_offset_m}};
}

}  // namespace vlmpc
