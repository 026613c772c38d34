#pragma once

#include <stdexcept>

#include "json.hpp"
#include "lam/grid.hpp"
#include "lam/scene.hpp"

namespace lam::detail {

using nlohmann::json;

inline json encode_constraints(const ConstraintMap& map) {
  const Lattice& lat = map.lattice();
  json rows = json::array();
  for (int y = 0; y < lat.height(); ++y) {
    json row = json::array();
    int run_label = map.at(Cell{0, y});
    int run_len = 1;
    for (int x = 1; x < lat.width(); ++x) {
      int label = map.at(Cell{x, y});
      if (label == run_label) {
        ++run_len;
      } else {
        row.push_back(run_label);
        row.push_back(run_len);
        run_label = label;
        run_len = 1;
      }
    }
    row.push_back(run_label);
    row.push_back(run_len);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ConstraintMap decode_constraints(const json& rows, const Lattice& lat) {
  if (!rows.is_array() || static_cast<int>(rows.size()) != lat.height())
    throw std::invalid_argument("constraint rows do not match lattice height");
  ConstraintMap map(lat);
  for (int y = 0; y < lat.height(); ++y) {
    const json& row = rows[static_cast<size_t>(y)];
    if (!row.is_array() || row.size() % 2 != 0)
      throw std::invalid_argument("constraint row " + std::to_string(y) +
                                  " is not a label/count pair list");
    int x = 0;
    for (size_t k = 0; k < row.size(); k += 2) {
      int label = row[k].get<int>();
      int count = row[k + 1].get<int>();
      if ((label != 1 && label != -1) || count <= 0)
        throw std::invalid_argument("constraint row " + std::to_string(y) + " has a bad run");
      if (x + count > lat.width())
        throw std::invalid_argument("constraint row " + std::to_string(y) + " overflows width");
      for (int i = 0; i < count; ++i, ++x)
        map.set(Cell{x, y}, static_cast<std::int8_t>(label));
    }
    if (x != lat.width())
      throw std::invalid_argument("constraint row " + std::to_string(y) + " underfills width");
  }
  return map;
}

inline json encode_source(const Source& s) {
  json j;
  j["mu"] = {s.mu.x, s.mu.y};
  j["sigma"] = {{s.sxx, s.sxy}, {s.sxy, s.syy}};
  return j;
}

inline Source decode_source(const json& j) {
  Source s;
  s.mu = Cell{j.at("mu").at(0).get<int>(), j.at("mu").at(1).get<int>()};
  const json& sig = j.at("sigma");
  s.sxx = sig.at(0).at(0).get<double>();
  s.sxy = sig.at(0).at(1).get<double>();
  s.syy = sig.at(1).at(1).get<double>();
  if (sig.at(1).at(0).get<double>() != s.sxy)
    throw std::invalid_argument("source sigma is not symmetric");
  return s;
}

}  // namespace lam::detail
