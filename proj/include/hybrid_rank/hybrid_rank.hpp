#pragma once

// Umbrella header.
#include "hybrid_rank/boe.hpp"
#include "hybrid_rank/config.hpp"
#include "hybrid_rank/corpus.hpp"
#include "hybrid_rank/errors.hpp"
#include "hybrid_rank/evalx.hpp"
#include "hybrid_rank/fusion.hpp"
#include "hybrid_rank/pipeline.hpp"
#include "hybrid_rank/problex.hpp"
#include "hybrid_rank/ranking.hpp"
#include "hybrid_rank/sparse.hpp"
#include "hybrid_rank/stopwords.hpp"
#include "hybrid_rank/tfidf.hpp"
