#pragma once

// JSON file formats for grids, grid functions, masks, polytopes and
// valuation specs. Every reader throws Error{Parse} on malformed input.

#include "vconv/grid.hpp"
#include "vconv/valuation.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace vconv::io {

using Json = nlohmann::json;

/// {"lo":[...],"hi":[...],"shape":[...]}
Json to_json(const GridDomain& domain);
GridDomain domain_from_json(const Json& j);

/// {"domain":{...},"values":[...]} with the string "inf" for +inf; NaN and -inf are rejected.
Json to_json(const ExtGridFn& f);
ExtGridFn grid_fn_from_json(const Json& j);

/// {"domain":{...},"marked":[0/1 per cell]}
Json to_json(const ScanMask& mask);
ScanMask mask_from_json(const Json& j);

/// {"vertices":[[y_1..y_n,t],...]}
Json to_json(const Polytope& body);
Polytope polytope_from_json(const Json& j);

/// Pairing, hessian, constant or composite. String entries ("weight", matrix
/// fields in "aux", composite terms) are file paths relative to `base_dir`.
/// With `checked`, pairings must satisfy both weight conditions.
ValuationSpec valuation_from_json(const Json& j, const std::filesystem::path& base_dir, bool checked = true);

Json read_json(const std::filesystem::path& path);
ExtGridFn load_grid_fn(const std::filesystem::path& path);
ScanMask load_mask(const std::filesystem::path& path);
Polytope load_polytope(const std::filesystem::path& path);
ValuationSpec load_valuation(const std::filesystem::path& path, bool checked = true);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// see either the old file or the complete new one.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// "lo:hi:points" per axis, comma separated.
GridDomain parse_grid(const std::string& text);

} // namespace vconv::io
