#pragma once

#include <string>

#include "bsca/resnet.hpp"

namespace bsca {

/// Checkpoint container format, version 1 (see docs/checkpoint-format.md):
/// fixed little-endian header (magic "BSCANET1", version, flags, image size,
/// optimizer step count, tensor count) followed by self-describing tensor
/// entries (name, dtype, shape, float32 payload).
///
/// `image_size` is the square input resolution the network was trained with;
/// inference reads it back so volumes get preprocessed consistently.
/// `with_optimizer` controls whether Adam moment buffers are written;
/// stripping them roughly halves the file and leaves forwards unchanged.
void save_weights(const Network& net, const std::string& path, int image_size,
                  bool with_optimizer = true);

struct LoadedCheckpoint {
  Network network;
  int image_size = 0;
  bool has_optimizer_state = false;
};

/// Round-trips save_weights bit-exactly, including BN running statistics and
/// (when present) Adam state. Malformed files raise DataError naming the
/// first offending entry.
LoadedCheckpoint load_weights(const std::string& path);

}  // namespace bsca
