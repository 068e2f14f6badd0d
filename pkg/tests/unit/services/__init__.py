# Services unit tests