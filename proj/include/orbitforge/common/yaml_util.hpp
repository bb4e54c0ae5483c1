#pragma once

// Small typed accessors over yaml-cpp nodes. Every accessor takes the dotted
// path of the node so that errors name the offending field.

#include <yaml-cpp/yaml.h>

#include <array>
#include <string>
#include <vector>

#include "orbitforge/common/error.hpp"
#include "orbitforge/common/vec.hpp"

namespace orbitforge::yaml {

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

template <typename T>
T as(const YAML::Node& node, const std::string& path) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline YAML::Node child(const YAML::Node& node, const std::string& key,
                        const std::string& path) {
  if (!node.IsMap()) throw ParseError(path + ": expected a mapping");
  return node[key];
}

template <typename T>
T required(const YAML::Node& node, const std::string& key, const std::string& path) {
  const YAML::Node c = child(node, key, path);
  if (!c) throw ValidationError(join(path, key), "required field missing");
  return as<T>(c, join(path, key));
}

template <typename T>
T optional(const YAML::Node& node, const std::string& key, const std::string& path,
           T fallback) {
  if (!node || node.IsNull()) return fallback;
  const YAML::Node c = child(node, key, path);
  if (!c) return fallback;
  return as<T>(c, join(path, key));
}

template <std::size_t N>
std::array<double, N> fixed_vector(const YAML::Node& node, const std::string& path) {
  if (!node.IsSequence() || node.size() != N)
    throw ParseError(path + ": expected a sequence of " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = as<double>(node[i], path);
  return out;
}

inline Vec2 vec2(const YAML::Node& node, const std::string& path) {
  const auto a = fixed_vector<2>(node, path);
  return {a[0], a[1]};
}

inline Vec3 vec3(const YAML::Node& node, const std::string& path) {
  const auto a = fixed_vector<3>(node, path);
  return {a[0], a[1], a[2]};
}

inline Vec2 optional_vec2(const YAML::Node& node, const std::string& key,
                          const std::string& path, Vec2 fallback) {
  if (!node || !node.IsMap() || !node[key]) return fallback;
  return vec2(node[key], join(path, key));
}

inline YAML::Node parse_text(std::string_view text) {
  try {
    return YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw ParseError(std::string("yaml: ") + e.what());
  }
}

inline YAML::Node parse_file(const std::string& path) {
  try {
    return YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw ParseError(path + ": cannot open file");
  } catch (const YAML::Exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace orbitforge::yaml
