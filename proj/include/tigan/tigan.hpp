#pragma once

// Umbrella header.

#include "tigan/baselines.hpp"
#include "tigan/corpus.hpp"
#include "tigan/embeddings.hpp"
#include "tigan/eval.hpp"
#include "tigan/graph.hpp"
#include "tigan/io.hpp"
#include "tigan/model.hpp"
#include "tigan/nn.hpp"
#include "tigan/tensor.hpp"
