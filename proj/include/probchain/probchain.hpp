#pragma once

#include "probchain/chain_error.hpp"
#include "probchain/cpoisson.hpp"
#include "probchain/csv.hpp"
#include "probchain/hmm.hpp"
#include "probchain/lexicon_nn.hpp"
#include "probchain/parallel.hpp"
#include "probchain/rand48.hpp"
#include "probchain/tree_classifier.hpp"
#include "probchain/version.hpp"
