// JSON serialization of grids and grid functions:
//   axis:          {"points": [...]}
//   tensor grid:   {"axes": [axis, ...]}
//   grid function: {"axis_sizes": [...], "values": [...]}
#ifndef QVI_JSON_IO_HPP
#define QVI_JSON_IO_HPP

#include <json.hpp>

#include "qvi/grid.hpp"

namespace qvi {

inline nlohmann::json to_json(const SpaceGrid& g) {
    return {{"points", Vec(g.points().begin(), g.points().end())}};
}

inline SpaceGrid space_grid_from_json(const nlohmann::json& j) {
    return SpaceGrid(j.at("points").get<Vec>());
}

inline nlohmann::json to_json(const TensorGrid& g) {
    nlohmann::json axes = nlohmann::json::array();
    for (int k = 0; k < g.dim(); ++k) axes.push_back(to_json(g.axis(k)));
    return {{"axes", axes}};
}

inline TensorGrid tensor_grid_from_json(const nlohmann::json& j) {
    const auto& axes = j.at("axes");
    if (axes.size() == 1) return TensorGrid(space_grid_from_json(axes[0]));
    if (axes.size() == 2)
        return TensorGrid(space_grid_from_json(axes[0]), space_grid_from_json(axes[1]));
    throw std::invalid_argument("tensor_grid_from_json: expected 1 or 2 axes");
}

inline nlohmann::json grid_function_to_json(const TensorGrid& g, const Vec& values) {
    std::vector<int> sizes;
    for (int k = 0; k < g.dim(); ++k) sizes.push_back(g.axis(k).nodes());
    return {{"axis_sizes", sizes}, {"values", values}};
}

inline Vec grid_function_from_json(const nlohmann::json& j) {
    const auto sizes = j.at("axis_sizes").get<std::vector<int>>();
    auto values = j.at("values").get<Vec>();
    size_t expect = 1;
    for (int s : sizes) expect *= static_cast<size_t>(s);
    if (values.size() != expect)
        throw std::invalid_argument("grid_function_from_json: value count mismatch");
    return values;
}

} // namespace qvi

#endif
