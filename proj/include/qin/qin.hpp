#pragma once
// Umbrella header: the whole pipeline in one include.

#include "qin/checkpoint.hpp"
#include "qin/common.hpp"
#include "qin/config.hpp"
#include "qin/dataset.hpp"
#include "qin/dataset_cache.hpp"
#include "qin/gradcheck.hpp"
#include "qin/graph.hpp"
#include "qin/matrix.hpp"
#include "qin/metrics.hpp"
#include "qin/model.hpp"
#include "qin/optimizer.hpp"
#include "qin/relevance_index.hpp"
#include "qin/rsu.hpp"
#include "qin/training.hpp"
