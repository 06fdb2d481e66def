#pragma once

// Graph file: "FRUSTGR1", u64 n, u64 nnz, u64 row_ptr[n+1], u64 cols[nnz],
// f64 weights[nnz], provenance[nnz] as (i32 layer, i64 param), then the layer
// table: u64 count, per layer (u32 id length, id bytes, u8 kind, u64 begin,
// u64 count). All little-endian.

#include <filesystem>

#include "frustra/graph.hpp"

namespace frustra {

void write_graph(const std::filesystem::path& path, const SignedSparseGraph& graph);
SignedSparseGraph read_graph(const std::filesystem::path& path);

}  // namespace frustra
