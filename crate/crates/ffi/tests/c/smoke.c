#include <math.h>
#include <stdio.h>
#include <string.h>

#include "debtcast.h"

#define CHECK(expr)                                                          \
    do {                                                                     \
        DcStatus s_ = (expr);                                                \
        if (s_ != DC_STATUS_OK) {                                            \
            fprintf(stderr, "%s -> %d: %s\n", #expr, s_, dc_last_error());   \
            return 1;                                                        \
        }                                                                    \
    } while (0)

int main(void) {
    double x[40], y[20], pred[20];
    for (int i = 0; i < 20; i++) {
        x[2 * i] = i;
        x[2 * i + 1] = i % 4;
        y[i] = 3.0 * i - 2.0 * (i % 4) + 7.0;
    }

    DcMatrix *m = NULL;
    CHECK(dc_matrix_new(20, 2, x, y, &m));

    DcModel *model = NULL;
    CHECK(dc_model_fit("linear_regression", NULL, 1, m, &model));
    CHECK(dc_model_predict(model, m, pred, 20));
    for (int i = 0; i < 20; i++) {
        if (fabs(pred[i] - y[i]) > 1e-9) {
            fprintf(stderr, "row %d: %f != %f\n", i, pred[i], y[i]);
            return 1;
        }
    }

    char *json = NULL;
    CHECK(dc_model_to_json(model, &json));
    if (strstr(json, "debtcast-model") == NULL) {
        fprintf(stderr, "unexpected model JSON\n");
        return 1;
    }
    dc_string_free(json);

    DcCvScores scores;
    CHECK(dc_cross_validate("extra_trees", "{\"n_estimators\": 10}", 3, m, 4, 0, &scores));
    if (!(scores.mae >= 0.0 && scores.r2 <= 1.0)) {
        fprintf(stderr, "implausible scores\n");
        return 1;
    }

    if (dc_model_fit("no_such_model", NULL, 0, m, &model) != DC_STATUS_INVALID_ARGUMENT) {
        fprintf(stderr, "bad kind accepted\n");
        return 1;
    }

    dc_model_free(model);
    dc_matrix_free(m);
    printf("ok %s\n", dc_version());
    return 0;
}
