# Fixed English function-word list. Changing it changes every similarity, so a new
# list gets a new id.
STOPWORDS_ID = 'en-50-v1'

STOPWORDS: tuple[str, ...] = (
    'an', 'and', 'are', 'as', 'at', 'be', 'been', 'being', 'but', 'by',
    'for', 'from', 'has', 'have', 'he', 'her', 'his', 'if', 'in', 'into',
    'is', 'it', 'its', 'me', 'my', 'of', 'on', 'or', 'our', 'she',
    'so', 'that', 'the', 'their', 'them', 'then', 'there', 'these', 'they', 'this',
    'to', 'was', 'we', 'were', 'what', 'when', 'which', 'will', 'with', 'you'
)

STOPWORD_LISTS: dict[str, tuple[str, ...]] = {
    STOPWORDS_ID: STOPWORDS,
    'none': ()
}
