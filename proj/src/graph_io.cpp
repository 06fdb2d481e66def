#include "frustra/graph_io.hpp"

#include <fstream>

#include "frustra/binary_io.hpp"
#include "frustra/error.hpp"

namespace frustra {

namespace {
constexpr char kGraphMagic[9] = "FRUSTGR1";
constexpr std::uint8_t kKindCount = 13;
}  // namespace

void write_graph(const std::filesystem::path& path, const SignedSparseGraph& g) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write graph file " + path.string());
  using binary::write_le;
  os.write(kGraphMagic, 8);
  write_le<std::uint64_t>(os, static_cast<std::uint64_t>(g.node_count()));
  write_le<std::uint64_t>(os, static_cast<std::uint64_t>(g.edge_count()));
  for (auto v : g.row_ptr()) write_le<std::uint64_t>(os, static_cast<std::uint64_t>(v));
  for (auto v : g.cols()) write_le<std::uint64_t>(os, static_cast<std::uint64_t>(v));
  for (auto v : g.weights()) write_le<double>(os, v);
  for (const auto& p : g.provenance()) {
    write_le<std::int32_t>(os, p.layer);
    write_le<std::int64_t>(os, p.param);
  }
  write_le<std::uint64_t>(os, g.layers().size());
  for (const auto& b : g.layers()) {
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(b.id.size()));
    os.write(b.id.data(), static_cast<std::streamsize>(b.id.size()));
    write_le<std::uint8_t>(os, static_cast<std::uint8_t>(b.kind));
    write_le<std::uint64_t>(os, static_cast<std::uint64_t>(b.begin));
    write_le<std::uint64_t>(os, static_cast<std::uint64_t>(b.count));
  }
  if (!os) throw IoError("failed writing graph file " + path.string());
}

SignedSparseGraph read_graph(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open graph file " + path.string());
  const std::string what = "graph " + path.string();
  using binary::read_le;
  binary::expect_magic(is, kGraphMagic, what);
  const auto n = read_le<std::uint64_t>(is, what);
  const auto nnz = read_le<std::uint64_t>(is, what);
  const auto file_size = std::filesystem::file_size(path);
  if (n >= file_size || nnz > file_size) throw IoError(what + ": header sizes exceed file size");

  std::vector<std::int64_t> row_ptr(n + 1);
  for (auto& v : row_ptr) v = static_cast<std::int64_t>(read_le<std::uint64_t>(is, what));
  std::vector<std::int64_t> cols(nnz);
  for (auto& v : cols) v = static_cast<std::int64_t>(read_le<std::uint64_t>(is, what));
  std::vector<double> weights(nnz);
  for (auto& v : weights) v = read_le<double>(is, what);
  std::vector<EdgeProvenance> prov(nnz);
  for (auto& p : prov) {
    p.layer = read_le<std::int32_t>(is, what);
    p.param = read_le<std::int64_t>(is, what);
  }
  const auto layer_count = read_le<std::uint64_t>(is, what);
  if (layer_count > n + 1) throw IoError(what + ": implausible layer count");
  std::vector<LayerBlock> layers(layer_count);
  for (auto& b : layers) {
    const auto len = read_le<std::uint32_t>(is, what);
    if (len > 4096) throw IoError(what + ": layer id too long");
    b.id.resize(len);
    if (!is.read(b.id.data(), len)) throw IoError(what + ": unexpected end of file");
    const auto kind = read_le<std::uint8_t>(is, what);
    if (kind >= kKindCount) throw IoError(what + ": unknown layer kind code");
    b.kind = static_cast<LayerKind>(kind);
    b.begin = static_cast<std::int64_t>(read_le<std::uint64_t>(is, what));
    b.count = static_cast<std::int64_t>(read_le<std::uint64_t>(is, what));
  }
  return SignedSparseGraph(static_cast<std::int64_t>(n), std::move(row_ptr), std::move(cols),
                           std::move(weights), std::move(prov), std::move(layers));
}

}  // namespace frustra
