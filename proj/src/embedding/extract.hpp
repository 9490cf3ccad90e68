#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "corpus/manifest.hpp"
#include "embedding/backend.hpp"
#include "embedding/store.hpp"

namespace diffdetect::embedding {

using BackendFactory = std::function<std::unique_ptr<EmbeddingBackend>()>;

struct ExtractOptions {
  FeatureMode mode = FeatureMode::kImageOnly;
  // Image paths in the manifest are relative to this directory.
  std::filesystem::path image_root = ".";
  // 0 picks hardware_concurrency.
  unsigned workers = 1;
};

struct SampleFailure {
  std::string id;
  std::string message;
};

// One record per manifest record, in manifest order. Any per-sample failure
// aborts the whole extraction: the error message lists every failing id.
EmbeddingStore extract_corpus(const corpus::Manifest& manifest, const BackendFactory& factory,
                              const ExtractOptions& options);

// extract_corpus + write_store. No file is created when extraction fails.
void extract_corpus_to_file(const corpus::Manifest& manifest, const BackendFactory& factory,
                            const ExtractOptions& options, const std::filesystem::path& out);

}  // namespace diffdetect::embedding
