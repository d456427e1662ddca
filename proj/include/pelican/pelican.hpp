#pragma once

#include "pelican/checkpoint.hpp"
#include "pelican/data/csv.hpp"
#include "pelican/data/dataset_io.hpp"
#include "pelican/data/encoder.hpp"
#include "pelican/data/folds.hpp"
#include "pelican/data/schema.hpp"
#include "pelican/data/synthetic.hpp"
#include "pelican/error.hpp"
#include "pelican/kernels.hpp"
#include "pelican/metrics.hpp"
#include "pelican/model.hpp"
#include "pelican/rng.hpp"
#include "pelican/tensor.hpp"
#include "pelican/trainer.hpp"
#include "pelican/version.hpp"
