#pragma once

#include "sentlabel/analysis.hpp"
#include "sentlabel/classify.hpp"
#include "sentlabel/csv.hpp"
#include "sentlabel/experiments.hpp"
#include "sentlabel/factorization.hpp"
#include "sentlabel/label_matrix.hpp"
#include "sentlabel/parallel.hpp"
#include "sentlabel/random.hpp"
