class MockCache(dict):
    '''
    Stands in for a diskcache.Cache holding oracle results. Records every write, and every lookup
    along with whether it hit.
    '''

    def __init__(self):
        self.set_calls = []
        self.get_calls = []
        self.closed = False

    def get(self, key, default = None, **kwargs):
        self.get_calls.append((key, key in self))
        return super().get(key, default)

    def set(self, key, value, **kwargs):
        self[key] = value

    def __setitem__(self, key, value):
        self.set_calls.append((key, value))
        super().__setitem__(key, value)

    def close(self):
        self.closed = True
