#pragma once

#include "tensorhar/error.hpp"
#include "tensorhar/random.hpp"
#include "tensorhar/tensor.hpp"
#include "tensorhar/signal_prep.hpp"
#include "tensorhar/dataset.hpp"
#include "tensorhar/svm.hpp"
#include "tensorhar/stm.hpp"
#include "tensorhar/logreg.hpp"
#include "tensorhar/knn.hpp"
#include "tensorhar/forest.hpp"
#include "tensorhar/classifier.hpp"
#include "tensorhar/metrics.hpp"
#include "tensorhar/cv.hpp"
#include "tensorhar/search.hpp"
#include "tensorhar/federated.hpp"
#include "tensorhar/text_io.hpp"
#include "tensorhar/uci_har.hpp"
#include "tensorhar/custom_csv.hpp"
#include "tensorhar/model_io.hpp"
#include "tensorhar/synth.hpp"
