from scenestats.features import extract_features, match_features


class BaseFeatureExtractor:
    """
    A base class for feature extractors.

    This class defines the interface used by the match-count and
    reprojection statistics. Any subclass must provide its own
    implementation of the `extract` method; `match` defaults to Hamming
    brute-force matching with a ratio test, which subclasses with
    non-binary descriptors override.
    """

    def __init__(self, budget=100, fast_threshold=0.08):
        self.budget = budget
        self.fast_threshold = fast_threshold

    def extract(self, frame):
        """
        Extract up to `self.budget` features from a frame.

        Args:
            frame (GrayFrame): The preprocessed frame.

        Returns:
            FeatureSet: Keypoints in level-0 pixel coordinates and their
                        descriptors.

        Raises:
            NotImplementedError: If this method is not overridden by a
            subclass.
        """
        raise NotImplementedError(
            "This method must be overridden by subclasses."
        )

    def match(self, a, b, ratio_threshold=0.75):
        """
        Match features of `a` to `b` and return the accepted MatchPairs.
        """
        return match_features(a, b, ratio_threshold)


class OrientedBinaryExtractor(BaseFeatureExtractor):
    """FAST keypoints with Harris ranking and rotated binary descriptors."""

    def extract(self, frame):
        return extract_features(
            frame, budget=self.budget, fast_threshold=self.fast_threshold)
