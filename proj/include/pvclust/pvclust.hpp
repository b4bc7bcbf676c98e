#pragma once

// Umbrella header: daily-profile wording, Dirichlet embeddings, statistical
// distances, agglomerative clustering, quantile scoring, and the synthetic
// fleet generator.

#include "pvclust/agglomerative.hpp"
#include "pvclust/csv.hpp"
#include "pvclust/distance.hpp"
#include "pvclust/errors.hpp"
#include "pvclust/evaluation.hpp"
#include "pvclust/gridsearch.hpp"
#include "pvclust/kmeans.hpp"
#include "pvclust/lda.hpp"
#include "pvclust/pipeline.hpp"
#include "pvclust/rng.hpp"
#include "pvclust/runconfig.hpp"
#include "pvclust/series.hpp"
#include "pvclust/special.hpp"
#include "pvclust/synthgen.hpp"
#include "pvclust/timegrid.hpp"
#include "pvclust/wording.hpp"
