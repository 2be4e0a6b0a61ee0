#pragma once

// Umbrella header.

#include "rapidner/annotation.hpp"
#include "rapidner/corpus.hpp"
#include "rapidner/dataset.hpp"
#include "rapidner/error.hpp"
#include "rapidner/gazetteer.hpp"
#include "rapidner/kgstore.hpp"
#include "rapidner/matcher.hpp"
#include "rapidner/pipeline.hpp"
#include "rapidner/quality.hpp"
#include "rapidner/review.hpp"
#include "rapidner/review_server.hpp"
