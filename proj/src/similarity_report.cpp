// Copyright (c) 2026 The tasnet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <fstream>

#include "tasnet/embeddings.hpp"

namespace tasnet {

std::vector<SimilarityRow> SimilarityReport(std::span<const MixtureTriple> triples,
                                            const EmbeddingBackend &backend) {
  std::vector<SimilarityRow> rows;
  rows.reserve(triples.size());
  for (const MixtureTriple &t : triples) {
    const EmbeddingVector a = backend.Embed(t.source1);
    const EmbeddingVector b = backend.Embed(t.source2);
    rows.push_back({t.sample_id(), CosineSimilarity(a, b)});
  }
  return rows;
}

std::vector<SimilarityRow> SimilarityReport(const SplitManifest &manifest, std::string_view split,
                                            const EmbeddingBackend &backend) {
  std::vector<SimilarityRow> rows;
  for (const TripleRef &ref : manifest.split(split)) {
    const MixtureTriple t = LoadTriple(manifest, ref);
    const EmbeddingVector a = backend.Embed(t.source1);
    const EmbeddingVector b = backend.Embed(t.source2);
    rows.push_back({ref.sample_id, CosineSimilarity(a, b)});
  }
  return rows;
}

void WriteSimilarityCsv(const std::filesystem::path &path, std::span<const SimilarityRow> rows,
                        const EmbeddingBackend &backend) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << "sample_id,css,backend,layer\n";
  char buf[64];
  for (const SimilarityRow &r : rows) {
    std::snprintf(buf, sizeof(buf), "%.6f", r.css);
    out << r.sample_id << ',' << buf << ',' << ToString(backend.kind()) << ','
        << backend.layer() << '\n';
  }
  if (!out) Throw(ErrorKind::kIo, "cannot write " + path.string());
}

}  // namespace tasnet
