#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ciail/envs/nav_env.hpp"
#include "ciail/errors.hpp"

// Demonstration files are JSON lines: one header object, then one object per
// transition with fields traj, setting, t, s, a, s_next, done.

namespace ciail::harness {

using json = nlohmann::ordered_json;

inline constexpr int kDemoFormatVersion = 1;

struct DemoHeader {
  envs::EnvId env_id = envs::EnvId::move_point;
  std::size_t obs_dim = 4;
  envs::ActionSpace space;
  int n_settings = 4;
  int horizon = 200;
  std::uint64_t generator_seed = 0;
  int version = kDemoFormatVersion;
  friend bool operator==(const DemoHeader&, const DemoHeader&) = default;
};

struct Trajectory {
  int setting = 0;
  std::vector<envs::Transition> steps;
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct DemoSet {
  DemoHeader header;
  std::vector<Trajectory> trajectories;

  std::vector<envs::Transition> transitions() const {
    std::vector<envs::Transition> out;
    for (const auto& t : trajectories) out.insert(out.end(), t.steps.begin(), t.steps.end());
    return out;
  }

  // Throws LoadError on the first broken invariant.
  void validate() const {
    const bool discrete = header.space.discrete;
    for (std::size_t k = 0; k < trajectories.size(); ++k) {
      const auto& tr = trajectories[k];
      const std::string where = "trajectory " + std::to_string(k);
      if (tr.setting < 0 || tr.setting >= header.n_settings) throw LoadError(where + ": setting out of range");
      if (tr.steps.empty()) throw LoadError(where + ": empty");
      if (static_cast<int>(tr.steps.size()) > header.horizon) throw LoadError(where + ": longer than horizon");
      for (const auto& s : tr.steps) {
        if (s.s.size() != header.obs_dim || s.s_next.size() != header.obs_dim) {
          throw LoadError(where + ": observation width differs from header");
        }
        if (std::holds_alternative<int>(s.a) != discrete) throw LoadError(where + ": action type differs");
        if (s.setting_id != tr.setting) throw LoadError(where + ": mixed setting ids");
      }
    }
  }

  friend bool operator==(const DemoSet&, const DemoSet&) = default;
};

inline std::string to_jsonl(const DemoSet& d) {
  std::string out;
  json h;
  h["format"] = "ciail-demos";
  h["version"] = d.header.version;
  h["env_id"] = envs::to_string(d.header.env_id);
  h["obs_dim"] = d.header.obs_dim;
  h["action_space"] = {{"type", d.header.space.discrete ? "discrete" : "box"}, {"n", d.header.space.n}};
  h["n_settings"] = d.header.n_settings;
  h["horizon"] = d.header.horizon;
  h["generator_seed"] = d.header.generator_seed;
  out += h.dump() + "\n";
  for (std::size_t k = 0; k < d.trajectories.size(); ++k) {
    const auto& tr = d.trajectories[k];
    for (std::size_t t = 0; t < tr.steps.size(); ++t) {
      const auto& s = tr.steps[t];
      json r;
      r["traj"] = k;
      r["setting"] = tr.setting;
      r["t"] = t;
      r["s"] = s.s;
      if (const int* i = std::get_if<int>(&s.a)) r["a"] = *i;
      else r["a"] = std::get<envs::Vec2>(s.a);
      r["s_next"] = s.s_next;
      r["done"] = s.done;
      out += r.dump() + "\n";
    }
  }
  return out;
}

namespace detail {

template <typename T>
T field(const json& j, const char* name, std::size_t line) {
  if (!j.contains(name)) throw ParseError(line, std::string("missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ParseError(line, std::string("field '") + name + "' has the wrong type");
  }
}

}  // namespace detail

inline DemoSet from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  DemoSet d;
  bool have_header = false;
  while (std::getline(in, raw)) {
    ++line;
    if (raw.empty()) continue;
    json j;
    try {
      j = json::parse(raw);
    } catch (const json::parse_error& e) {
      throw ParseError(line, std::string("malformed JSON: ") + e.what());
    }
    if (!have_header) {
      if (detail::field<std::string>(j, "format", line) != "ciail-demos") throw ParseError(line, "not a demo file");
      d.header.version = detail::field<int>(j, "version", line);
      if (d.header.version != kDemoFormatVersion) {
        throw LoadError("unsupported demo format version " + std::to_string(d.header.version));
      }
      try {
        d.header.env_id = envs::env_id_from_string(detail::field<std::string>(j, "env_id", line));
      } catch (const ConfigError& e) {
        throw ParseError(line, e.what());
      }
      d.header.obs_dim = detail::field<std::size_t>(j, "obs_dim", line);
      const json space = detail::field<json>(j, "action_space", line);
      d.header.space.discrete = detail::field<std::string>(space, "type", line) == "discrete";
      d.header.space.n = detail::field<int>(space, "n", line);
      d.header.n_settings = detail::field<int>(j, "n_settings", line);
      d.header.horizon = detail::field<int>(j, "horizon", line);
      d.header.generator_seed = detail::field<std::uint64_t>(j, "generator_seed", line);
      have_header = true;
      continue;
    }
    const auto k = detail::field<std::size_t>(j, "traj", line);
    const auto t = detail::field<std::size_t>(j, "t", line);
    const int setting = detail::field<int>(j, "setting", line);
    if (k == d.trajectories.size()) {
      d.trajectories.push_back({setting, {}});
    } else if (k + 1 != d.trajectories.size()) {
      throw ParseError(line, "trajectory index out of sequence");
    }
    auto& tr = d.trajectories.back();
    if (t != tr.steps.size()) throw ParseError(line, "step index out of sequence");
    if (setting != tr.setting) throw ParseError(line, "setting changes inside a trajectory");
    envs::Transition s;
    s.s = detail::field<std::vector<double>>(j, "s", line);
    s.s_next = detail::field<std::vector<double>>(j, "s_next", line);
    s.done = detail::field<bool>(j, "done", line);
    if (!j.contains("a")) throw ParseError(line, "missing field 'a'");
    if (d.header.space.discrete) {
      s.a = detail::field<int>(j, "a", line);
    } else {
      const auto v = detail::field<std::vector<double>>(j, "a", line);
      if (v.size() != 2) throw ParseError(line, "continuous action must have 2 entries");
      s.a = envs::Vec2{v[0], v[1]};
    }
    s.setting_id = setting;
    s.round_id = 0;
    tr.steps.push_back(std::move(s));
  }
  if (!have_header) throw ParseError(line, "missing header");
  d.validate();
  return d;
}

inline void save_demos(const std::string& path, const DemoSet& d) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os << to_jsonl(d);
}

inline DemoSet load_demos(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open demo file '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return from_jsonl(ss.str());
}

}  // namespace ciail::harness
