from enum import Enum

class MeshFormat(str, Enum):
    OBJ = 'obj'
    PLY = 'ply'

class AffinityVariant(str, Enum):
    LITERAL  = 'literal'
    DECAYING = 'decaying'

class FlatteningMethod(str, Enum):
    PCA  = 'pca'
    TSNE = 'tsne'

class PlaneMode(str, Enum):
    CHORDAL_SPINE_CHORDAL_PLANES = 'chordal-spine+chordal-planes'
    RELAXED_SPINE_CHORDAL_PLANES = 'relaxedCMS-spine+chordal-planes'
    RELAXED_SPINE_NORMAL_PLANES  = 'relaxedCMS-spine+normal-planes'

    @property
    def chordal_planes(self) -> bool:
        return self != PlaneMode.RELAXED_SPINE_NORMAL_PLANES

class Criterion(str, Enum):
    SCORE1 = 'score1'
    SCORE2 = 'score2'

class TestMethod(str, Enum):
    HOTELLING   = 'hotelling'
    PERMUTATION = 'permutation'

class Correction(str, Enum):
    BH         = 'bh'
    BONFERRONI = 'bonferroni'

class Classifier(str, Enum):
    KNN         = 'knn'
    NAIVE_BAYES = 'naive_bayes'
