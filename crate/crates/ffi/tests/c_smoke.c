#include "ltrkit.h"

int run(const char *model_path) {
    LtrEnsemble *model = NULL;
    if (ltr_ensemble_load(model_path, &model) != LTR_STATUS_OK) {
        return 1;
    }
    double x[3] = {0.1, 0.2, 0.3};
    double score = 0.0;
    double phi[3];
    double base = 0.0;
    LtrStatus s = ltr_ensemble_predict(model, x, 3, &score);
    if (s == LTR_STATUS_OK) {
        s = ltr_ensemble_tree_shap(model, x, 3, phi, &base);
    }
    ltr_ensemble_free(model);
    double c1, c2;
    bool degenerate;
    ltr_compute_intervals(12.0, 0.5, &c1, &c2, &degenerate);
    const char *msg = ltr_last_error_message();
    (void)msg;
    return s == LTR_STATUS_OK ? 0 : 2;
}
